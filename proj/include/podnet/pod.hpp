#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "podnet/fem.hpp"
#include "podnet/mesh.hpp"
#include "podnet/sparse.hpp"

namespace podnet {

/// Snapshot columns are interior-DOF vectors; meta[k] = {run id, time index}.
struct SnapshotMatrix {
    Eigen::MatrixXd phi;
    std::vector<std::array<int, 2>> meta;

    int n_snapshots() const { return static_cast<int>(phi.cols()); }
};

/// Leading POD modes of a snapshot set: modes are orthonormal interior-DOF
/// vectors, sigma holds the nonincreasing singular values, eigvecs the
/// corresponding unit eigenvectors of the snapshot Gram matrix.
struct PodBasis {
    Eigen::MatrixXd modes;    ///< n_interior x m
    Eigen::VectorXd sigma;    ///< m, nonincreasing
    Eigen::MatrixXd eigvecs;  ///< N x m

    int n_modes() const { return static_cast<int>(modes.cols()); }
};

/// Basis of span(modes) rotated so that coefficient k reads off the solution
/// value at observation node k: psi_k(x_l) = delta_kl.
struct NodalBasis {
    std::vector<int> nodes;      ///< mesh node ids of observation points
    std::vector<int> node_rows;  ///< interior-DOF row of each node
    Eigen::MatrixXd alpha;       ///< m x m, row i holds the mode weights of psi_i
    Eigen::MatrixXd psi;         ///< n_interior x m

    int n_modes() const { return static_cast<int>(psi.cols()); }
};

/// Restricts full-node trajectories to interior DOFs and concatenates their
/// states run-major then time-major.
SnapshotMatrix collect_snapshots(const std::vector<Eigen::MatrixXd>& runs,
                                 const StructuredMesh& mesh);

/// Top-m modes via the eigendecomposition of the snapshot Gram matrix.
/// Mode signs follow a fixed convention (largest-magnitude entry positive)
/// so results are reproducible across runs.
PodBasis compute_pod(const SnapshotMatrix& snapshots, int m);

/// Snaps physical points to nearest mesh nodes; rejects boundary hits and
/// duplicates.
std::vector<int> select_observation_nodes(const StructuredMesh& mesh,
                                          const std::vector<std::array<double, 2>>& points);
/// Default layout by count; only the 5-node layout (center plus the four
/// quarter points) is defined.
std::vector<int> select_observation_nodes(const StructuredMesh& mesh, int count);

/// Solves sum_j alpha_ij xi_j(x_k) = delta_ik and assembles psi. Requires as
/// many nodes as modes and a well-conditioned node-value matrix.
NodalBasis build_nodal_basis(const PodBasis& pod, const std::vector<int>& nodes,
                             const StructuredMesh& mesh);

struct ProjectedSystem {
    Eigen::MatrixXd M;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

/// Galerkin triple (Psi' M Psi, Psi' A Psi, Psi' b) on interior DOFs.
ProjectedSystem project_system(const NodalBasis& basis, const CsrMatrix& M, const CsrMatrix& A,
                               const Eigen::VectorXd& b);

/// Fixed pieces of one reduced simulation.
struct RomWorkspace {
    StructuredMesh mesh;
    CsrMatrix mass_int;
    Eigen::MatrixXd M_tilde;
};

RomWorkspace make_rom_workspace(const DiffusionProblem& problem, const NodalBasis& basis);

/// One reduced implicit-Euler step. The stiffness matrix is reassembled on
/// the fine grid from the reconstructed lagged state Psi c_n, then projected.
Eigen::VectorXd step_rom(const RomWorkspace& ws, const NodalBasis& basis,
                         const DiffusionProblem& problem, const Eigen::VectorXd& c_n,
                         double t_next);

/// Reduced trajectory c^0 ... c^{n_steps} as columns.
Eigen::MatrixXd run_rom_trajectory(const DiffusionProblem& problem, const NodalBasis& basis,
                                   const Eigen::VectorXd& c0);

/// Interior-DOF field Psi c.
Eigen::VectorXd reconstruct(const NodalBasis& basis, const Eigen::VectorXd& c);

/// Nodal values of an interior-DOF field at the basis observation nodes.
Eigen::VectorXd sample_at_nodes(const NodalBasis& basis, const Eigen::VectorXd& interior);

}  // namespace podnet
