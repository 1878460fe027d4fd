#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "podnet/mesh.hpp"
#include "podnet/perm.hpp"
#include "podnet/sparse.hpp"

namespace podnet {

/// Time-dependent right-hand side g(x,t): a uniform background term plus
/// Gaussian wells with per-step rate amplitudes.
///
/// Rates are a schedule matrix with one row per time index and one column
/// per well; a single-row schedule means a time-independent source. The row
/// for time t is round(t / schedule_dt), clamped to the schedule range.
struct SourceSpec {
    std::vector<std::array<double, 2>> centers;
    double width = 0.05;          ///< Gaussian std dev of each well bump
    double constant = 0.0;        ///< spatially uniform term
    double schedule_dt = 1.0;     ///< spacing between schedule rows
    Eigen::MatrixXd schedule;     ///< n_times x n_wells rate amplitudes

    int n_wells() const { return static_cast<int>(centers.size()); }
    /// Well rate amplitudes at time t (empty for a well-free source).
    Eigen::VectorXd rates_at(double t) const;
    double value(double x, double y, double t) const;

    static SourceSpec zero();
    static SourceSpec uniform(double c);
};

/// Complete specification of one nonlinear diffusion run:
/// du/dt - div(kappa(x) exp(alpha u) grad u) = g on [0,1]^2, u = 0 on the
/// boundary, implicit Euler in time with the diffusion coefficient lagged
/// at the previous step.
struct DiffusionProblem {
    PermField kappa;
    double alpha = 0.0;
    SourceSpec source;
    double dt = 0.1;
    int n_steps = 10;
    Eigen::VectorXd u0;  ///< nodal coefficients, zero on boundary nodes

    void validate(const StructuredMesh& mesh) const;
};

/// Exact local matrices for one hx-by-hy Q1 element (nodes counterclockwise
/// from the SW corner). `coef` holds the diffusion coefficient at the four
/// 2x2 Gauss points in row-major order (eta varies slowest).
Eigen::Matrix4d element_mass(double hx, double hy);
Eigen::Matrix4d element_stiffness(double hx, double hy, const std::array<double, 4>& coef);

/// Unconstrained (all-node) Galerkin matrices and load vector.
CsrMatrix assemble_mass(const StructuredMesh& mesh);
CsrMatrix assemble_stiffness(const StructuredMesh& mesh, const PermField& kappa,
                             const Eigen::VectorXd& u_prev, double alpha);
Eigen::VectorXd assemble_load(const StructuredMesh& mesh, const SourceSpec& source, double t);

/// Dirichlet elimination: restriction to interior DOFs and zero-extension back.
CsrMatrix restrict_interior(const CsrMatrix& full, const StructuredMesh& mesh);
Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full, const StructuredMesh& mesh);
Eigen::VectorXd prolong_interior(const Eigen::VectorXd& interior, const StructuredMesh& mesh);

/// Jacobi-preconditioned CG with rtol 1e-12 and an iteration cap of 10 times
/// the system size. Throws SolverError on breakdown or cap.
Eigen::VectorXd solve_linear(const CsrMatrix& A, const Eigen::VectorXd& rhs);

/// Preassembled pieces that stay fixed across time steps of one problem.
struct FineWorkspace {
    StructuredMesh mesh;
    CsrMatrix mass_full;
    CsrMatrix mass_int;
};

FineWorkspace make_fine_workspace(const DiffusionProblem& problem);

/// One implicit-Euler step: solves (M + dt A(u_n)) u_{n+1} = M u_n + dt b(t_next)
/// on interior DOFs and zero-extends. `u_n` must vanish on boundary nodes.
Eigen::VectorXd step_fine(const FineWorkspace& ws, const DiffusionProblem& problem,
                          const Eigen::VectorXd& u_n, double t_next);
Eigen::VectorXd step_fine(const DiffusionProblem& problem, const Eigen::VectorXd& u_n,
                          double t_next);

/// Full trajectory u^0 ... u^{n_steps} as columns (all-node vectors).
Eigen::MatrixXd run_fine_trajectory(const DiffusionProblem& problem);

struct L2Error {
    double absolute = 0.0;
    double percent = 0.0;
};

/// Mass-weighted error: absolute = sqrt(e' M e), percent relative to
/// sqrt(u_ref' M u_ref). Throws when the reference has zero norm.
L2Error l2_error(const StructuredMesh& mesh, const CsrMatrix& M,
                 const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_pred);

}  // namespace podnet
