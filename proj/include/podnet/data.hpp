#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "podnet/fem.hpp"
#include "podnet/net.hpp"
#include "podnet/perm.hpp"
#include "podnet/pod.hpp"

namespace podnet {

/// One trajectory of reduced coefficients with everything needed to encode
/// network inputs from it. For observation realizations, `paired_inputs`
/// holds the companion simulation trajectory of the same initial condition;
/// network inputs for observation targets are read from it.
struct SampleRealization {
    int run_id = 0;
    Eigen::VectorXd c0;
    PermField field;
    SourceSpec source;
    double dt = 0.1;
    Eigen::MatrixXd trajectory;     ///< m x (k+1)
    Eigen::MatrixXd paired_inputs;  ///< m x (k+1) or empty
    Provenance provenance = Provenance::simulation;

    int n_steps() const { return static_cast<int>(trajectory.cols()) - 1; }
};

enum class DatasetMode : std::uint8_t { A = 0, B = 1, C = 2 };

/// Which parameters join the state in the network input x = (c^n, I^{n+1}),
/// and how the permeability enters: mean log10 conductivity over a coarse
/// lattice of element blocks.
struct InputEncoding {
    bool include_kappa = false;
    bool include_source = false;
    int kappa_lattice = 8;

    int dim(int n_wells) const;
    Eigen::VectorXd encode(const PermField& field, const SourceSpec& source, double t) const;
};

/// I.i.d. uniform coefficient vectors, deterministic in the seed.
std::vector<Eigen::VectorXd> sample_initial_conditions(int count, int m, std::uint64_t seed,
                                                       double lo = 0.0, double hi = 1.0);

/// Reduced-order trajectory on `perm`; provenance = simulation.
SampleRealization generate_simulation_realization(const Eigen::VectorXd& c0,
                                                  const PermField& perm,
                                                  const SourceSpec& source,
                                                  const NodalBasis& basis, double alpha,
                                                  double dt, int n_steps, int run_id);

/// Fine trajectory on `true_perm` started from the lifted coefficients,
/// sampled at the basis observation nodes; provenance = observation.
SampleRealization generate_observation_realization(const Eigen::VectorXd& c0,
                                                   const PermField& true_perm,
                                                   const SourceSpec& source,
                                                   const NodalBasis& basis, double alpha,
                                                   double dt, int n_steps, int run_id);

/// Builds (x, y) pairs per mode: A maps simulation states to observation
/// targets, C maps simulation states forward, B mixes both with provenance
/// tags. Observation-mode inputs come from the paired simulation run.
Dataset assemble_dataset(const std::vector<SampleRealization>& realizations, DatasetMode mode,
                         const InputEncoding& encoding);

/// Seeded choice of `train_count` training ids out of `ids`.
std::set<int> split_ids(std::vector<int> ids, int train_count, std::uint64_t seed);

/// Random split at run-id granularity; `train_count` counts distinct run
/// ids, and paired realizations follow their id.
std::pair<std::vector<SampleRealization>, std::vector<SampleRealization>> split(
    const std::vector<SampleRealization>& realizations, int train_count, std::uint64_t seed);

}  // namespace podnet
