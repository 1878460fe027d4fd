#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "podnet/common.hpp"
#include "podnet/fem.hpp"
#include "podnet/perm.hpp"

using namespace podnet;

namespace {

constexpr double kPi = 3.14159265358979323846;

PermField uniform_field(const StructuredMesh& mesh, double value) {
    PermField f;
    f.nx = mesh.nx;
    f.ny = mesh.ny;
    f.values.assign(static_cast<std::size_t>(mesh.nx) * mesh.ny, value);
    f.contrast = 1.0;
    return f;
}

Eigen::VectorXd interpolate(const StructuredMesh& mesh, double (*fn)(double, double)) {
    Eigen::VectorXd u(mesh.n_nodes());
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (mesh.boundary[static_cast<std::size_t>(n)]) {
            u[n] = 0.0;
            continue;
        }
        const auto [x, y] = mesh.node_coord(n);
        u[n] = fn(x, y);
    }
    return u;
}

double sinsin(double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }

}  // namespace

TEST_SUITE("fem") {

TEST_CASE("single-element mass matrix matches the exact integral") {
    const Eigen::Matrix4d M = element_mass(1.0, 1.0);
    Eigen::Matrix4d oracle;
    oracle << 4, 2, 1, 2, 2, 4, 2, 1, 1, 2, 4, 2, 2, 1, 2, 4;
    oracle /= 36.0;
    CHECK((M - oracle).cwiseAbs().maxCoeff() <= 1e-12);

    // scaling: mass scales with the element area
    const Eigen::Matrix4d Mh = element_mass(0.25, 0.5);
    CHECK((Mh - 0.125 * oracle).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("single-element stiffness matrix matches the exact integral") {
    const std::array<double, 4> unit = {1.0, 1.0, 1.0, 1.0};
    const Eigen::Matrix4d K = element_stiffness(1.0, 1.0, unit);
    Eigen::Matrix4d oracle;
    oracle << 4, -1, -2, -1, -1, 4, -1, -2, -2, -1, 4, -1, -1, -2, -1, 4;
    oracle /= 6.0;
    CHECK((K - oracle).cwiseAbs().maxCoeff() <= 1e-12);

    // uniform scaling leaves the stiffness invariant in 2D
    const Eigen::Matrix4d Ks = element_stiffness(0.125, 0.125, unit);
    CHECK((Ks - oracle).cwiseAbs().maxCoeff() <= 1e-12);

    // constants lie in the kernel for any aspect ratio and coefficient
    const std::array<double, 4> coef = {2.0, 0.5, 1.5, 3.0};
    const Eigen::Matrix4d Ka = element_stiffness(0.2, 0.05, coef);
    CHECK((Ka * Eigen::Vector4d::Ones()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((Ka - Ka.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembled mass integrates the partition of unity to the domain area") {
    const StructuredMesh mesh = build_mesh(6, 5);
    const CsrMatrix M = assemble_mass(mesh);
    CHECK(M.sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(M.symmetry_defect() <= 1e-15);
}

TEST_CASE("assembled stiffness annihilates constants") {
    const StructuredMesh mesh = build_mesh(5, 7);
    const PermField kappa = gen_channelized(11, 2, 100.0, mesh);
    const Eigen::VectorXd u_prev = Eigen::VectorXd::Zero(mesh.n_nodes());
    const CsrMatrix A = assemble_stiffness(mesh, kappa, u_prev, 3.0);
    const Eigen::VectorXd r = A.apply(Eigen::VectorXd::Ones(mesh.n_nodes()));
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-11);
    CHECK(A.symmetry_defect() <= 1e-14);
}

TEST_CASE("manufactured linear problem converges at second order in h") {
    // u_t = laplace(u) with u = exp(-2 pi^2 t) sin(pi x) sin(pi y) and no
    // source; one implicit-Euler step with dt = h^2 keeps the time error at
    // the spatial order.
    auto run = [](int n) {
        const StructuredMesh mesh = build_mesh(n, n);
        DiffusionProblem p;
        p.kappa = uniform_field(mesh, 1.0);
        p.alpha = 0.0;
        p.source = SourceSpec::zero();
        p.dt = 1.0 / (n * n);
        p.n_steps = 1;
        p.u0 = interpolate(mesh, sinsin);
        const Eigen::MatrixXd traj = run_fine_trajectory(p);
        const double decay = std::exp(-2.0 * kPi * kPi * p.dt);
        const Eigen::VectorXd exact = decay * p.u0;
        const CsrMatrix M = assemble_mass(mesh);
        return l2_error(mesh, M, exact, traj.col(1)).absolute;
    };
    const double e1 = run(8);
    const double e2 = run(16);
    const double e3 = run(32);
    const double rate12 = std::log2(e1 / e2);
    const double rate23 = std::log2(e2 / e3);
    CHECK(rate12 >= 1.8);
    CHECK(rate23 >= 1.8);
}

TEST_CASE("zero data stays zero and diffusion contracts without sources") {
    const StructuredMesh mesh = build_mesh(8, 8);
    DiffusionProblem p;
    p.kappa = gen_channelized(3, 2, 50.0, mesh);
    p.alpha = 20.0;
    p.source = SourceSpec::zero();
    p.dt = 0.1;
    p.n_steps = 6;
    p.u0 = Eigen::VectorXd::Zero(mesh.n_nodes());
    const Eigen::MatrixXd zero_traj = run_fine_trajectory(p);
    CHECK(zero_traj.cwiseAbs().maxCoeff() == 0.0);

    p.u0 = interpolate(mesh, sinsin);
    const Eigen::MatrixXd traj = run_fine_trajectory(p);
    for (int s = 1; s <= p.n_steps; ++s)
        CHECK(traj.col(s).cwiseAbs().maxCoeff() <
              traj.col(s - 1).cwiseAbs().maxCoeff() + 1e-14);
    CHECK(traj.col(p.n_steps).cwiseAbs().maxCoeff() < 0.2 * traj.col(0).cwiseAbs().maxCoeff());
}

TEST_CASE("implicit step solves the lagged variational system") {
    // (M + dt A(u^n)) u^{n+1} = M u^n + dt b, checked directly on interior DOFs
    const StructuredMesh mesh = build_mesh(6, 6);
    DiffusionProblem p;
    p.kappa = gen_channelized(7, 1, 10.0, mesh);
    p.alpha = 2.0;
    p.source = SourceSpec::zero();
    p.dt = 0.05;
    p.n_steps = 1;
    p.u0 = interpolate(mesh, sinsin);
    const FineWorkspace ws = make_fine_workspace(p);
    const Eigen::VectorXd u1 = step_fine(ws, p, p.u0, p.dt);
    const CsrMatrix A = restrict_interior(assemble_stiffness(mesh, p.kappa, p.u0, p.alpha), mesh);
    const CsrMatrix M = restrict_interior(assemble_mass(mesh), mesh);
    const Eigen::VectorXd lhs =
        M.apply(restrict_interior(u1, mesh)) + p.dt * A.apply(restrict_interior(u1, mesh));
    const Eigen::VectorXd rhs = M.apply(restrict_interior(p.u0, mesh));
    CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    // boundary values stay pinned at zero
    for (int n = 0; n < mesh.n_nodes(); ++n)
        if (mesh.boundary[static_cast<std::size_t>(n)]) CHECK(u1[n] == 0.0);
}

TEST_CASE("percentage error definition") {
    const StructuredMesh mesh = build_mesh(5, 5);
    const CsrMatrix M = assemble_mass(mesh);
    const Eigen::VectorXd u = interpolate(mesh, sinsin);
    CHECK(l2_error(mesh, M, u, u).percent == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(l2_error(mesh, M, u, Eigen::VectorXd::Zero(mesh.n_nodes())).percent ==
          doctest::Approx(100.0).epsilon(1e-12));
    CHECK(l2_error(mesh, M, u, 0.5 * u).percent == doctest::Approx(50.0).epsilon(1e-12));
    CHECK_THROWS_AS(l2_error(mesh, M, Eigen::VectorXd::Zero(mesh.n_nodes()), u), Error);
}

TEST_CASE("well sources follow their schedule") {
    SourceSpec s;
    s.centers = {{0.25, 0.25}, {0.75, 0.75}};
    s.width = 0.05;
    s.schedule_dt = 0.1;
    s.schedule.resize(3, 2);
    s.schedule << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    CHECK(s.rates_at(0.0)[0] == 1.0);
    CHECK(s.rates_at(0.1)[1] == 4.0);
    CHECK(s.rates_at(0.21)[0] == 5.0);
    CHECK(s.rates_at(9.0)[1] == 6.0);  // clamped to the last row
    // peak of the first bump at its center, scaled by the current rate
    CHECK(s.value(0.25, 0.25, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.value(0.25, 0.25, 0.2) == doctest::Approx(5.0).epsilon(1e-12));
    // static single-row schedule never varies
    SourceSpec st;
    st.centers = {{0.5, 0.5}};
    st.schedule.resize(1, 1);
    st.schedule << 7.0;
    CHECK(st.rates_at(123.0)[0] == 7.0);

    const SourceSpec z = SourceSpec::zero();
    CHECK(z.value(0.3, 0.3, 1.0) == 0.0);
    const SourceSpec u = SourceSpec::uniform(2.5);
    CHECK(u.value(0.9, 0.1, 5.0) == 2.5);
}

TEST_CASE("exponent clamping keeps assembly finite and warns once") {
    const StructuredMesh mesh = build_mesh(4, 4);
    const PermField kappa = uniform_field(mesh, 1.0);
    const Eigen::VectorXd huge = 10.0 * Eigen::VectorXd::Ones(mesh.n_nodes());
    set_warnings_enabled(false);
    const CsrMatrix A = assemble_stiffness(mesh, kappa, huge, 50.0);
    set_warnings_enabled(true);
    for (double v : A.vals) CHECK(std::isfinite(v));
    // non-finite lagged state is a hard error
    Eigen::VectorXd bad = huge;
    bad[7] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(assemble_stiffness(mesh, kappa, bad, 1.0), NumericalRangeError);
}

}  // TEST_SUITE
