#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "podnet/common.hpp"
#include "podnet/data.hpp"
#include "podnet/fem.hpp"
#include "podnet/perm.hpp"
#include "podnet/pod.hpp"

using namespace podnet;

namespace {

PermField uniform_field(int nx, int ny, double value) {
    PermField f;
    f.nx = nx;
    f.ny = ny;
    f.values.assign(static_cast<std::size_t>(nx) * ny, value);
    return f;
}

SourceSpec two_wells() {
    SourceSpec s;
    s.centers = {{0.3, 0.3}, {0.7, 0.7}};
    s.width = 0.05;
    s.schedule_dt = 0.1;
    s.schedule.resize(3, 2);
    s.schedule << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    return s;
}

/// Synthetic realization with a recognizable trajectory pattern.
SampleRealization synthetic(int run_id, int m, int steps, double base,
                            Provenance prov = Provenance::simulation) {
    SampleRealization r;
    r.run_id = run_id;
    r.field = uniform_field(8, 8, 1.0);
    r.source = two_wells();
    r.dt = 0.1;
    r.trajectory.resize(m, steps + 1);
    for (int n = 0; n <= steps; ++n)
        for (int i = 0; i < m; ++i) r.trajectory(i, n) = base + 10.0 * n + i;
    r.c0 = r.trajectory.col(0);
    r.provenance = prov;
    return r;
}

/// Small reduced-basis scene for the realization generators.
struct Scene {
    StructuredMesh mesh;
    PermField kappa;
    SourceSpec source;
    NodalBasis basis;
};

const Scene& scene() {
    static const Scene sc = [] {
        Scene s;
        s.mesh = build_mesh(12, 12);
        s.kappa = gen_channelized(33, 2, 10.0, s.mesh);
        s.source.centers = {{0.5, 0.5}, {0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
        s.source.width = 0.05;
        s.source.schedule.resize(1, 5);
        s.source.schedule << 20.0, 22.5, 25.0, 27.5, 30.0;

        std::vector<Eigen::MatrixXd> runs;
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int run = 0; run < 4; ++run) {
            DiffusionProblem p;
            p.kappa = s.kappa;
            p.alpha = 5.0;
            p.source = s.source;
            p.dt = 0.05;
            p.n_steps = 6;
            p.u0 = Eigen::VectorXd::Zero(s.mesh.n_nodes());
            for (int n = 0; n < s.mesh.n_nodes(); ++n) {
                if (s.mesh.boundary[static_cast<std::size_t>(n)]) continue;
                const auto [x, y] = s.mesh.node_coord(n);
                double v = 0.0;
                for (const auto& c : s.source.centers)
                    v += uni(rng) *
                         std::exp(-((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1])) /
                                  (2.0 * 0.12 * 0.12));
                p.u0[n] = 0.3 * v;
            }
            runs.push_back(run_fine_trajectory(p));
        }
        const PodBasis pod = compute_pod(collect_snapshots(runs, s.mesh), 5);
        s.basis = build_nodal_basis(pod, select_observation_nodes(s.mesh, 5), s.mesh);
        return s;
    }();
    return sc;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("initial condition sampling: range, determinism, mean") {
    const auto ics = sample_initial_conditions(20000, 5, 42);
    REQUIRE(ics.size() == 20000);
    double sum = 0.0;
    for (const auto& c : ics) {
        REQUIRE(c.size() == 5);
        CHECK(c.minCoeff() >= 0.0);
        CHECK(c.maxCoeff() < 1.0);
        sum += c.sum();
    }
    CHECK(sum / (20000.0 * 5.0) == doctest::Approx(0.5).epsilon(0.01));

    const auto again = sample_initial_conditions(20000, 5, 42);
    CHECK((ics[123] - again[123]).cwiseAbs().maxCoeff() == 0.0);
    const auto other = sample_initial_conditions(1, 5, 43);
    CHECK((ics[0] - other[0]).cwiseAbs().maxCoeff() > 0.0);

    const auto shifted = sample_initial_conditions(100, 2, 7, -1.0, 3.0);
    for (const auto& c : shifted) {
        CHECK(c.minCoeff() >= -1.0);
        CHECK(c.maxCoeff() < 3.0);
    }
    CHECK_THROWS_AS(sample_initial_conditions(0, 5, 1), Error);
    CHECK_THROWS_AS(sample_initial_conditions(5, 0, 1), Error);
    CHECK_THROWS_AS(sample_initial_conditions(5, 2, 1, 1.0, 1.0), Error);
}

TEST_CASE("input encoding dimensions and layout") {
    InputEncoding none;
    CHECK(none.dim(3) == 0);
    InputEncoding kappa_only;
    kappa_only.include_kappa = true;
    CHECK(kappa_only.dim(0) == 64);
    InputEncoding both;
    both.include_kappa = true;
    both.include_source = true;
    CHECK(both.dim(2) == 66);

    // uniform field: every lattice block averages to the same log10
    const PermField f = uniform_field(8, 8, 100.0);
    const SourceSpec src = two_wells();
    const Eigen::VectorXd enc = both.encode(f, src, 0.15);
    for (int i = 0; i < 64; ++i) CHECK(enc[i] == doctest::Approx(2.0).epsilon(1e-14));
    // well rates appended after the conductivity block, row chosen by time
    CHECK(enc[64] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(enc[65] == doctest::Approx(4.0).epsilon(1e-14));

    InputEncoding src_only;
    src_only.include_source = true;
    const Eigen::VectorXd enc2 = src_only.encode(f, src, 10.0);  // clamps to last row
    REQUIRE(enc2.size() == 2);
    CHECK(enc2[0] == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(enc2[1] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("input encoding averages log conductivity per block") {
    // 16x16 elements onto an 8x8 lattice: 2x2 element blocks
    PermField f = uniform_field(16, 16, 1.0);
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i)
            f.values[static_cast<std::size_t>(j) * 16 + i] = std::pow(10.0, i);
    InputEncoding e;
    e.include_kappa = true;
    const Eigen::VectorXd enc = e.encode(f, SourceSpec::zero(), 0.0);
    REQUIRE(enc.size() == 64);
    for (int bj = 0; bj < 8; ++bj)
        for (int bi = 0; bi < 8; ++bi)
            CHECK(enc[bj * 8 + bi] == doctest::Approx(2.0 * bi + 0.5).epsilon(1e-13));

    const PermField coarse = uniform_field(4, 4, 1.0);
    CHECK_THROWS_AS(e.encode(coarse, SourceSpec::zero(), 0.0), Error);
}

TEST_CASE("forward-map dataset pairs states with their successors") {
    std::vector<SampleRealization> reals;
    reals.push_back(synthetic(3, 4, 5, 100.0));
    reals.push_back(synthetic(7, 4, 3, 500.0));

    InputEncoding enc;
    enc.include_source = true;
    const Dataset data = assemble_dataset(reals, DatasetMode::C, enc);
    REQUIRE(data.size() == 8);
    REQUIRE(data.X.rows() == 6);
    REQUIRE(data.Y.rows() == 4);

    int col = 0;
    for (const auto& r : reals) {
        for (int n = 0; n < r.n_steps(); ++n, ++col) {
            CHECK((data.X.col(col).head(4) - r.trajectory.col(n)).cwiseAbs().maxCoeff() == 0.0);
            const Eigen::VectorXd want = enc.encode(r.field, r.source, (n + 1) * r.dt);
            CHECK((data.X.col(col).tail(2) - want).cwiseAbs().maxCoeff() == 0.0);
            CHECK((data.Y.col(col) - r.trajectory.col(n + 1)).cwiseAbs().maxCoeff() == 0.0);
            CHECK(data.run_ids[static_cast<std::size_t>(col)] == r.run_id);
            CHECK(data.step_ids[static_cast<std::size_t>(col)] == n);
            CHECK(data.tags[static_cast<std::size_t>(col)] == Provenance::simulation);
        }
    }
}

TEST_CASE("observation datasets read inputs from the paired trajectory") {
    SampleRealization obs = synthetic(1, 3, 4, 0.0, Provenance::observation);
    SampleRealization sim = synthetic(1, 3, 4, 1000.0);
    obs.paired_inputs = sim.trajectory;

    const Dataset data = assemble_dataset({obs}, DatasetMode::A, InputEncoding{});
    REQUIRE(data.size() == 4);
    for (int n = 0; n < 4; ++n) {
        // inputs from the companion simulation, targets from the observations
        CHECK((data.X.col(n) - sim.trajectory.col(n)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((data.Y.col(n) - obs.trajectory.col(n + 1)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(data.tags[static_cast<std::size_t>(n)] == Provenance::observation);
    }

    // mode C skips observations entirely
    const Dataset sims_only = assemble_dataset({obs, sim}, DatasetMode::C, InputEncoding{});
    CHECK(sims_only.size() == 4);
    CHECK((sims_only.X.col(0) - sim.trajectory.col(0)).cwiseAbs().maxCoeff() == 0.0);

    // mode B keeps both and tags them
    const Dataset mixed = assemble_dataset({sim, obs}, DatasetMode::B, InputEncoding{});
    REQUIRE(mixed.size() == 8);
    CHECK(mixed.tags[0] == Provenance::simulation);
    CHECK(mixed.tags[4] == Provenance::observation);
}

TEST_CASE("dataset assembly rejects malformed inputs") {
    const SampleRealization sim = synthetic(0, 3, 4, 0.0);
    SampleRealization obs = synthetic(1, 3, 4, 50.0, Provenance::observation);

    CHECK_THROWS_AS(assemble_dataset({}, DatasetMode::C, InputEncoding{}), Error);
    // mode A without observations, mode B without both kinds
    CHECK_THROWS_AS(assemble_dataset({sim}, DatasetMode::A, InputEncoding{}), Error);
    CHECK_THROWS_AS(assemble_dataset({sim}, DatasetMode::B, InputEncoding{}), Error);
    // observation realizations must carry paired inputs
    CHECK_THROWS_AS(assemble_dataset({obs}, DatasetMode::A, InputEncoding{}), Error);
    obs.paired_inputs.resize(3, 2);  // wrong shape
    obs.paired_inputs.setZero();
    CHECK_THROWS_AS(assemble_dataset({obs}, DatasetMode::A, InputEncoding{}), Error);

    SampleRealization flat = synthetic(2, 3, 4, 0.0);
    flat.trajectory = flat.trajectory.col(0).eval();
    CHECK_THROWS_AS(assemble_dataset({flat}, DatasetMode::C, InputEncoding{}), Error);

    const SampleRealization wide = synthetic(3, 5, 4, 0.0);
    CHECK_THROWS_AS(assemble_dataset({sim, wide}, DatasetMode::C, InputEncoding{}), Error);
}

TEST_CASE("run-id splits are deterministic and leak-free") {
    std::vector<int> ids;
    for (int i = 0; i < 10; ++i) ids.push_back(i);
    const std::set<int> train = split_ids(ids, 7, 99);
    CHECK(train.size() == 7);
    for (int id : train) CHECK((id >= 0 && id < 10));
    CHECK(train == split_ids(ids, 7, 99));
    CHECK_THROWS_AS(split_ids(ids, 10, 99), Error);
    CHECK_THROWS_AS(split_ids(ids, 0, 99), Error);

    // paired realizations follow their run id through the split
    std::vector<SampleRealization> reals;
    for (int id = 0; id < 6; ++id) {
        reals.push_back(synthetic(id, 3, 2, 0.0));
        reals.push_back(synthetic(id, 3, 2, 10.0, Provenance::observation));
    }
    const auto [train_set, test_set] = split(reals, 4, 5);
    CHECK(train_set.size() == 8);
    CHECK(test_set.size() == 4);
    std::set<int> train_ids, test_ids;
    for (const auto& r : train_set) train_ids.insert(r.run_id);
    for (const auto& r : test_set) test_ids.insert(r.run_id);
    CHECK(train_ids.size() == 4);
    CHECK(test_ids.size() == 2);
    for (int id : test_ids) CHECK(train_ids.count(id) == 0);
}

TEST_CASE("simulation realizations run the reduced model deterministically") {
    const Scene& sc = scene();
    const Eigen::VectorXd c0 = Eigen::VectorXd::Constant(5, 0.2);
    const SampleRealization r =
        generate_simulation_realization(c0, sc.kappa, sc.source, sc.basis, 5.0, 0.05, 6, 4);
    CHECK(r.run_id == 4);
    CHECK(r.provenance == Provenance::simulation);
    CHECK(r.trajectory.rows() == 5);
    CHECK(r.n_steps() == 6);
    CHECK(r.paired_inputs.size() == 0);
    CHECK((r.trajectory.col(0) - c0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.trajectory.allFinite());

    const SampleRealization again =
        generate_simulation_realization(c0, sc.kappa, sc.source, sc.basis, 5.0, 0.05, 6, 4);
    CHECK((r.trajectory - again.trajectory).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("observation realizations sample the fine model at the basis nodes") {
    const Scene& sc = scene();
    const Eigen::VectorXd c0 = Eigen::VectorXd::Constant(5, 0.15);
    const SampleRealization r =
        generate_observation_realization(c0, sc.kappa, sc.source, sc.basis, 5.0, 0.05, 6, 2);
    CHECK(r.provenance == Provenance::observation);
    CHECK(r.trajectory.rows() == 5);
    CHECK(r.n_steps() == 6);
    // sampling the reconstructed start state recovers the coefficients
    CHECK((r.trajectory.col(0) - c0).cwiseAbs().maxCoeff() <= 1e-12);

    // matches a fine run started from the lifted state, restricted to nodes
    DiffusionProblem p;
    p.kappa = sc.kappa;
    p.alpha = 5.0;
    p.source = sc.source;
    p.dt = 0.05;
    p.n_steps = 6;
    p.u0 = prolong_interior(reconstruct(sc.basis, c0), sc.mesh);
    const Eigen::MatrixXd fine = run_fine_trajectory(p);
    for (int t = 0; t <= 6; ++t) {
        const Eigen::VectorXd want =
            sample_at_nodes(sc.basis, restrict_interior(fine.col(t), sc.mesh));
        CHECK((r.trajectory.col(t) - want).cwiseAbs().maxCoeff() <= 1e-13);
    }

    // reduced and fine trajectories disagree in general (the model gap)
    const SampleRealization sim =
        generate_simulation_realization(c0, sc.kappa, sc.source, sc.basis, 5.0, 0.05, 6, 2);
    CHECK((r.trajectory - sim.trajectory).cwiseAbs().maxCoeff() > 0.0);

    const PermField wrong = gen_channelized(5, 2, 10.0, build_mesh(8, 8));
    CHECK_THROWS_AS(
        generate_observation_realization(c0, wrong, sc.source, sc.basis, 5.0, 0.05, 2, 0),
        Error);
}

}  // TEST_SUITE
