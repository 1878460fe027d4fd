#include "podnet/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "podnet/common.hpp"

namespace podnet {
namespace {

constexpr double kExpClamp = 50.0;
constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

// Reference square [-1,1]^2, nodes counterclockwise from (-1,-1).
void shape(double xi, double eta, double n[4]) {
    n[0] = 0.25 * (1.0 - xi) * (1.0 - eta);
    n[1] = 0.25 * (1.0 + xi) * (1.0 - eta);
    n[2] = 0.25 * (1.0 + xi) * (1.0 + eta);
    n[3] = 0.25 * (1.0 - xi) * (1.0 + eta);
}

void shape_grad(double xi, double eta, double dxi[4], double deta[4]) {
    dxi[0] = -0.25 * (1.0 - eta);
    dxi[1] = 0.25 * (1.0 - eta);
    dxi[2] = 0.25 * (1.0 + eta);
    dxi[3] = -0.25 * (1.0 + eta);
    deta[0] = -0.25 * (1.0 - xi);
    deta[1] = -0.25 * (1.0 + xi);
    deta[2] = 0.25 * (1.0 + xi);
    deta[3] = 0.25 * (1.0 - xi);
}

struct GaussPoint {
    double xi, eta;
};

// Row-major: eta varies slowest, matching the coef array convention.
constexpr std::array<GaussPoint, 4> kQuad = {{
    {-kGauss, -kGauss},
    {kGauss, -kGauss},
    {-kGauss, kGauss},
    {kGauss, kGauss},
}};

void scatter(std::vector<Triplet>& trips, const std::array<int, 4>& nodes,
             const Eigen::Matrix4d& local) {
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            trips.push_back({nodes[a], nodes[b], local(a, b)});
}

}  // namespace

Eigen::VectorXd SourceSpec::rates_at(double t) const {
    if (schedule.rows() == 0 || schedule.cols() == 0)
        return Eigen::VectorXd::Zero(n_wells());
    if (schedule.cols() != n_wells())
        throw Error("SourceSpec: schedule columns do not match well count");
    Eigen::Index row = 0;
    if (schedule.rows() > 1) {
        if (!(schedule_dt > 0.0)) throw Error("SourceSpec: schedule_dt must be > 0");
        row = static_cast<Eigen::Index>(std::lround(t / schedule_dt));
        row = std::clamp<Eigen::Index>(row, 0, schedule.rows() - 1);
    }
    return schedule.row(row).transpose();
}

double SourceSpec::value(double x, double y, double t) const {
    double v = constant;
    if (!centers.empty()) {
        const Eigen::VectorXd r = rates_at(t);
        const double inv2w2 = 1.0 / (2.0 * width * width);
        for (int k = 0; k < n_wells(); ++k) {
            const double dx = x - centers[static_cast<std::size_t>(k)][0];
            const double dy = y - centers[static_cast<std::size_t>(k)][1];
            v += r[k] * std::exp(-(dx * dx + dy * dy) * inv2w2);
        }
    }
    return v;
}

SourceSpec SourceSpec::zero() { return SourceSpec{}; }

SourceSpec SourceSpec::uniform(double c) {
    SourceSpec s;
    s.constant = c;
    return s;
}

void DiffusionProblem::validate(const StructuredMesh& mesh) const {
    if (!(dt > 0.0)) throw Error("DiffusionProblem: dt must be > 0");
    if (n_steps < 1) throw Error("DiffusionProblem: n_steps must be >= 1");
    if (kappa.nx != mesh.nx || kappa.ny != mesh.ny)
        throw Error("DiffusionProblem: kappa does not match mesh");
    if (u0.size() != mesh.n_nodes())
        throw Error("DiffusionProblem: u0 dimension mismatch");
    for (int k = 0; k < mesh.n_nodes(); ++k)
        if (mesh.boundary[static_cast<std::size_t>(k)] && u0[k] != 0.0)
            throw Error("DiffusionProblem: u0 must vanish on boundary nodes");
}

Eigen::Matrix4d element_mass(double hx, double hy) {
    const double jac = 0.25 * hx * hy;
    Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
    for (const auto& gp : kQuad) {
        double n[4];
        shape(gp.xi, gp.eta, n);
        for (int a = 0; a < 4; ++a)
            for (int b = a; b < 4; ++b) local(a, b) += jac * n[a] * n[b];
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < a; ++b) local(a, b) = local(b, a);
    return local;
}

Eigen::Matrix4d element_stiffness(double hx, double hy, const std::array<double, 4>& coef) {
    const double jac = 0.25 * hx * hy;
    const double sx = 2.0 / hx;
    const double sy = 2.0 / hy;
    Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
    for (int q = 0; q < 4; ++q) {
        double dxi[4], deta[4];
        shape_grad(kQuad[static_cast<std::size_t>(q)].xi, kQuad[static_cast<std::size_t>(q)].eta,
                   dxi, deta);
        const double w = jac * coef[static_cast<std::size_t>(q)];
        for (int a = 0; a < 4; ++a) {
            const double gax = dxi[a] * sx;
            const double gay = deta[a] * sy;
            for (int b = a; b < 4; ++b)
                local(a, b) += w * (gax * (dxi[b] * sx) + gay * (deta[b] * sy));
        }
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < a; ++b) local(a, b) = local(b, a);
    return local;
}

CsrMatrix assemble_mass(const StructuredMesh& mesh) {
    const Eigen::Matrix4d local = element_mass(mesh.hx, mesh.hy);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_elements()) * 16);
    for (int e = 0; e < mesh.n_elements(); ++e) scatter(trips, mesh.element_nodes(e), local);
    return csr_from_triplets(mesh.n_nodes(), mesh.n_nodes(), trips);
}

CsrMatrix assemble_stiffness(const StructuredMesh& mesh, const PermField& kappa,
                             const Eigen::VectorXd& u_prev, double alpha) {
    if (u_prev.size() != mesh.n_nodes())
        throw Error("assemble_stiffness: u_prev dimension mismatch");
    const std::vector<double> kap = eval_on_elements(kappa, mesh);

    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_elements()) * 16);
    long clamped = 0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        std::array<double, 4> coef{};
        for (int q = 0; q < 4; ++q) {
            double n[4];
            shape(kQuad[static_cast<std::size_t>(q)].xi, kQuad[static_cast<std::size_t>(q)].eta,
                  n);
            double uq = 0.0;
            for (int a = 0; a < 4; ++a) uq += n[a] * u_prev[nodes[static_cast<std::size_t>(a)]];
            double arg = alpha * uq;
            if (!std::isfinite(arg))
                throw NumericalRangeError("assemble_stiffness: non-finite exponent");
            if (arg < -kExpClamp || arg > kExpClamp) {
                arg = std::clamp(arg, -kExpClamp, kExpClamp);
                ++clamped;
            }
            const double c = kap[static_cast<std::size_t>(e)] * std::exp(arg);
            if (!std::isfinite(c))
                throw NumericalRangeError("assemble_stiffness: non-finite coefficient");
            coef[static_cast<std::size_t>(q)] = c;
        }
        scatter(trips, nodes, element_stiffness(mesh.hx, mesh.hy, coef));
    }
    if (clamped > 0)
        warn("assemble_stiffness: exp argument clamped at " + std::to_string(clamped) +
             " quadrature points");
    return csr_from_triplets(mesh.n_nodes(), mesh.n_nodes(), trips);
}

Eigen::VectorXd assemble_load(const StructuredMesh& mesh, const SourceSpec& source, double t) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.n_nodes());
    const double jac = 0.25 * mesh.hx * mesh.hy;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        const auto [x0, y0] = mesh.node_coord(nodes[0]);
        for (const auto& gp : kQuad) {
            double n[4];
            shape(gp.xi, gp.eta, n);
            const double x = x0 + 0.5 * (gp.xi + 1.0) * mesh.hx;
            const double y = y0 + 0.5 * (gp.eta + 1.0) * mesh.hy;
            const double g = source.value(x, y, t);
            for (int a = 0; a < 4; ++a) b[nodes[static_cast<std::size_t>(a)]] += jac * g * n[a];
        }
    }
    return b;
}

CsrMatrix restrict_interior(const CsrMatrix& full, const StructuredMesh& mesh) {
    if (full.rows != mesh.n_nodes() || full.cols != mesh.n_nodes())
        throw Error("restrict_interior: matrix does not match mesh");
    std::vector<Triplet> trips;
    for (int r = 0; r < full.rows; ++r) {
        const int ri = mesh.interior_index[static_cast<std::size_t>(r)];
        if (ri < 0) continue;
        for (int k = full.row_ptr[static_cast<std::size_t>(r)];
             k < full.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
            const int ci = mesh.interior_index[static_cast<std::size_t>(full.col_idx[static_cast<std::size_t>(k)])];
            if (ci < 0) continue;
            trips.push_back({ri, ci, full.vals[static_cast<std::size_t>(k)]});
        }
    }
    return csr_from_triplets(mesh.n_interior(), mesh.n_interior(), trips);
}

Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full, const StructuredMesh& mesh) {
    if (full.size() != mesh.n_nodes()) throw Error("restrict_interior: vector size mismatch");
    Eigen::VectorXd out(mesh.n_interior());
    for (int i = 0; i < mesh.n_interior(); ++i) out[i] = full[mesh.interior_nodes[static_cast<std::size_t>(i)]];
    return out;
}

Eigen::VectorXd prolong_interior(const Eigen::VectorXd& interior, const StructuredMesh& mesh) {
    if (interior.size() != mesh.n_interior()) throw Error("prolong_interior: vector size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.n_nodes());
    for (int i = 0; i < mesh.n_interior(); ++i) out[mesh.interior_nodes[static_cast<std::size_t>(i)]] = interior[i];
    return out;
}

Eigen::VectorXd solve_linear(const CsrMatrix& A, const Eigen::VectorXd& rhs) {
    return solve_cg(A, rhs, 1e-12, 10 * A.rows);
}

FineWorkspace make_fine_workspace(const DiffusionProblem& problem) {
    FineWorkspace ws;
    ws.mesh = build_mesh(problem.kappa.nx, problem.kappa.ny);
    problem.validate(ws.mesh);
    ws.mass_full = assemble_mass(ws.mesh);
    ws.mass_int = restrict_interior(ws.mass_full, ws.mesh);
    return ws;
}

Eigen::VectorXd step_fine(const FineWorkspace& ws, const DiffusionProblem& problem,
                          const Eigen::VectorXd& u_n, double t_next) {
    const StructuredMesh& mesh = ws.mesh;
    if (u_n.size() != mesh.n_nodes()) throw Error("step_fine: state dimension mismatch");
    for (int k = 0; k < mesh.n_nodes(); ++k)
        if (mesh.boundary[static_cast<std::size_t>(k)] && u_n[k] != 0.0)
            throw Error("step_fine: state violates the boundary condition");

    const CsrMatrix A_int =
        restrict_interior(assemble_stiffness(mesh, problem.kappa, u_n, problem.alpha), mesh);
    const Eigen::VectorXd b_int =
        restrict_interior(assemble_load(mesh, problem.source, t_next), mesh);
    const Eigen::VectorXd un_int = restrict_interior(u_n, mesh);

    // Same mesh connectivity, so the sparsity patterns coincide.
    CsrMatrix S = ws.mass_int;
    if (S.col_idx != A_int.col_idx || S.row_ptr != A_int.row_ptr)
        throw Error("step_fine: sparsity pattern mismatch");
    for (std::size_t k = 0; k < S.vals.size(); ++k) S.vals[k] += problem.dt * A_int.vals[k];

    const Eigen::VectorXd rhs = ws.mass_int.apply(un_int) + problem.dt * b_int;
    return prolong_interior(solve_linear(S, rhs), mesh);
}

Eigen::VectorXd step_fine(const DiffusionProblem& problem, const Eigen::VectorXd& u_n,
                          double t_next) {
    return step_fine(make_fine_workspace(problem), problem, u_n, t_next);
}

Eigen::MatrixXd run_fine_trajectory(const DiffusionProblem& problem) {
    const FineWorkspace ws = make_fine_workspace(problem);
    Eigen::MatrixXd traj(ws.mesh.n_nodes(), problem.n_steps + 1);
    traj.col(0) = problem.u0;
    for (int n = 0; n < problem.n_steps; ++n)
        traj.col(n + 1) = step_fine(ws, problem, traj.col(n), (n + 1) * problem.dt);
    return traj;
}

L2Error l2_error(const StructuredMesh& mesh, const CsrMatrix& M, const Eigen::VectorXd& u_ref,
                 const Eigen::VectorXd& u_pred) {
    if (u_ref.size() != u_pred.size() || M.rows != u_ref.size() || M.cols != u_ref.size())
        throw Error("l2_error: dimension mismatch");
    if (M.rows != mesh.n_nodes() && M.rows != mesh.n_interior())
        throw Error("l2_error: matrix does not match mesh");
    const Eigen::VectorXd e = u_ref - u_pred;
    const double num = std::max(0.0, e.dot(M.apply(e)));
    const double den = u_ref.dot(M.apply(u_ref));
    if (den <= 0.0) throw Error("l2_error: reference field has zero norm");
    L2Error out;
    out.absolute = std::sqrt(num);
    out.percent = 100.0 * out.absolute / std::sqrt(den);
    return out;
}

}  // namespace podnet
