#include "podnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "podnet/common.hpp"

namespace podnet {
namespace {

constexpr std::uint64_t kSaltIc = 0x646174612e696373ULL;
constexpr std::uint64_t kSaltSplit = 0x646174612e73706cULL;

}  // namespace

int InputEncoding::dim(int n_wells) const {
    int d = 0;
    if (include_kappa) d += kappa_lattice * kappa_lattice;
    if (include_source) d += n_wells;
    return d;
}

Eigen::VectorXd InputEncoding::encode(const PermField& field, const SourceSpec& source,
                                      double t) const {
    Eigen::VectorXd out(dim(source.n_wells()));
    Eigen::Index pos = 0;
    if (include_kappa) {
        const int p = kappa_lattice;
        if (p < 1 || field.nx < p || field.ny < p)
            throw Error("InputEncoding: field coarser than the encoding lattice");
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
        Eigen::MatrixXd cnt = Eigen::MatrixXd::Zero(p, p);
        for (int j = 0; j < field.ny; ++j) {
            const int bj = j * p / field.ny;
            for (int i = 0; i < field.nx; ++i) {
                const int bi = i * p / field.nx;
                sum(bj, bi) += std::log10(field.values[static_cast<std::size_t>(j) * field.nx + i]);
                cnt(bj, bi) += 1.0;
            }
        }
        for (int bj = 0; bj < p; ++bj)
            for (int bi = 0; bi < p; ++bi) out[pos++] = sum(bj, bi) / cnt(bj, bi);
    }
    if (include_source) {
        const Eigen::VectorXd r = source.rates_at(t);
        out.segment(pos, r.size()) = r;
        pos += r.size();
    }
    return out;
}

std::vector<Eigen::VectorXd> sample_initial_conditions(int count, int m, std::uint64_t seed,
                                                       double lo, double hi) {
    if (count < 1) throw Error("sample_initial_conditions: count must be >= 1");
    if (m < 1) throw Error("sample_initial_conditions: dimension must be >= 1");
    if (!(hi > lo)) throw Error("sample_initial_conditions: empty range");
    std::mt19937_64 rng(mix_seed(seed, kSaltIc));
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int r = 0; r < count; ++r) {
        Eigen::VectorXd c(m);
        for (int i = 0; i < m; ++i) c[i] = dist(rng);
        out.push_back(std::move(c));
    }
    return out;
}

SampleRealization generate_simulation_realization(const Eigen::VectorXd& c0,
                                                  const PermField& perm,
                                                  const SourceSpec& source,
                                                  const NodalBasis& basis, double alpha,
                                                  double dt, int n_steps, int run_id) {
    DiffusionProblem problem;
    problem.kappa = perm;
    problem.alpha = alpha;
    problem.source = source;
    problem.dt = dt;
    problem.n_steps = n_steps;

    SampleRealization real;
    real.run_id = run_id;
    real.c0 = c0;
    real.field = perm;
    real.source = source;
    real.dt = dt;
    real.trajectory = run_rom_trajectory(problem, basis, c0);
    real.provenance = Provenance::simulation;
    return real;
}

SampleRealization generate_observation_realization(const Eigen::VectorXd& c0,
                                                   const PermField& true_perm,
                                                   const SourceSpec& source,
                                                   const NodalBasis& basis, double alpha,
                                                   double dt, int n_steps, int run_id) {
    const StructuredMesh mesh = build_mesh(true_perm.nx, true_perm.ny);
    if (basis.psi.rows() != mesh.n_interior())
        throw Error("generate_observation_realization: basis does not match field mesh");

    DiffusionProblem problem;
    problem.kappa = true_perm;
    problem.alpha = alpha;
    problem.source = source;
    problem.dt = dt;
    problem.n_steps = n_steps;
    problem.u0 = prolong_interior(reconstruct(basis, c0), mesh);

    const Eigen::MatrixXd fine = run_fine_trajectory(problem);

    SampleRealization real;
    real.run_id = run_id;
    real.c0 = c0;
    real.field = true_perm;
    real.source = source;
    real.dt = dt;
    real.trajectory.resize(basis.n_modes(), fine.cols());
    for (Eigen::Index t = 0; t < fine.cols(); ++t)
        real.trajectory.col(t) = sample_at_nodes(basis, restrict_interior(fine.col(t), mesh));
    real.provenance = Provenance::observation;
    return real;
}

Dataset assemble_dataset(const std::vector<SampleRealization>& realizations, DatasetMode mode,
                         const InputEncoding& encoding) {
    if (realizations.empty()) throw Error("assemble_dataset: no realizations");

    // Which realizations contribute pairs, and from which trajectories.
    std::vector<const SampleRealization*> contributors;
    for (const auto& r : realizations) {
        const bool is_obs = r.provenance == Provenance::observation;
        if (mode == DatasetMode::A && is_obs) contributors.push_back(&r);
        if (mode == DatasetMode::C && !is_obs) contributors.push_back(&r);
        if (mode == DatasetMode::B) contributors.push_back(&r);
    }
    if (contributors.empty())
        throw Error("assemble_dataset: no realizations with the provenance this mode needs");
    if (mode == DatasetMode::B) {
        bool has_obs = false, has_sim = false;
        for (const auto* r : contributors) {
            (r->provenance == Provenance::observation ? has_obs : has_sim) = true;
        }
        if (!has_obs || !has_sim)
            throw Error("assemble_dataset: mode B needs both observation and simulation data");
    }

    const int m = static_cast<int>(contributors.front()->trajectory.rows());
    int total = 0;
    int enc_dim = -1;
    for (const auto* r : contributors) {
        if (r->trajectory.rows() != m) throw Error("assemble_dataset: mixed state dimensions");
        if (r->n_steps() < 1) throw Error("assemble_dataset: trajectory too short");
        if (r->provenance == Provenance::observation && r->paired_inputs.size() == 0)
            throw Error("assemble_dataset: observation realization lacks paired "
                        "simulation inputs");
        if (r->paired_inputs.size() > 0 &&
            (r->paired_inputs.rows() != r->trajectory.rows() ||
             r->paired_inputs.cols() != r->trajectory.cols()))
            throw Error("assemble_dataset: paired input trajectory shape mismatch");
        const int d = encoding.dim(r->source.n_wells());
        if (enc_dim < 0) enc_dim = d;
        if (d != enc_dim) throw Error("assemble_dataset: inconsistent input encoding dims");
        total += r->n_steps();
    }

    Dataset data;
    data.X.resize(m + enc_dim, total);
    data.Y.resize(m, total);
    data.tags.reserve(static_cast<std::size_t>(total));
    data.run_ids.reserve(static_cast<std::size_t>(total));
    data.step_ids.reserve(static_cast<std::size_t>(total));
    Eigen::Index col = 0;
    for (const auto* r : contributors) {
        const Eigen::MatrixXd& inputs =
            r->paired_inputs.size() > 0 ? r->paired_inputs : r->trajectory;
        for (int n = 0; n < r->n_steps(); ++n, ++col) {
            data.X.col(col).head(m) = inputs.col(n);
            if (enc_dim > 0)
                data.X.col(col).tail(enc_dim) =
                    encoding.encode(r->field, r->source, (n + 1) * r->dt);
            data.Y.col(col) = r->trajectory.col(n + 1);
            data.tags.push_back(r->provenance);
            data.run_ids.push_back(r->run_id);
            data.step_ids.push_back(n);
        }
    }
    return data;
}

std::set<int> split_ids(std::vector<int> ids, int train_count, std::uint64_t seed) {
    const int n = static_cast<int>(ids.size());
    if (train_count < 1 || train_count >= n)
        throw Error("split: train_count must satisfy 1 <= train_count < distinct run ids");
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(mix_seed(seed, kSaltSplit));
    std::shuffle(ids.begin(), ids.end(), rng);
    return std::set<int>(ids.begin(), ids.begin() + train_count);
}

std::pair<std::vector<SampleRealization>, std::vector<SampleRealization>> split(
    const std::vector<SampleRealization>& realizations, int train_count, std::uint64_t seed) {
    std::vector<int> ids;
    {
        std::set<int> seen;
        for (const auto& r : realizations)
            if (seen.insert(r.run_id).second) ids.push_back(r.run_id);
    }
    const std::set<int> train_ids = split_ids(ids, train_count, seed);

    std::pair<std::vector<SampleRealization>, std::vector<SampleRealization>> out;
    for (const auto& r : realizations)
        (train_ids.count(r.run_id) ? out.first : out.second).push_back(r);
    return out;
}

}  // namespace podnet
