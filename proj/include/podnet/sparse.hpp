#pragma once

#include <Eigen/Dense>
#include <vector>

namespace podnet {

/// Compressed sparse row matrix (square or rectangular, full storage).
struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;  // size rows+1
    std::vector<int> col_idx;
    std::vector<double> vals;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::VectorXd diagonal() const;
    Eigen::MatrixXd dense() const;
    double sum() const;

    /// Entrywise symmetry check: max |A_ij - A_ji|.
    double symmetry_defect() const;
};

/// One (i, j, value) assembly contribution.
struct Triplet {
    int row;
    int col;
    double val;
};

/// Compresses triplets (duplicates summed) into CSR with sorted columns.
CsrMatrix csr_from_triplets(int rows, int cols, std::vector<Triplet> triplets);

struct CgSummary {
    int iterations = 0;
    double residual = 0.0;  // final |Ax-b|
};

/// Jacobi-preconditioned conjugate gradient for SPD systems.
///
/// Stops when |Ax-b| <= rtol*|b|. Throws SolverError if the iteration cap is
/// reached first; the error carries the last residual.
Eigen::VectorXd solve_cg(const CsrMatrix& A, const Eigen::VectorXd& b, double rtol, int max_iter,
                         CgSummary* summary = nullptr);

}  // namespace podnet
