#include "podnet/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "podnet/common.hpp"

namespace podnet {

Eigen::VectorXd CsrMatrix::apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += vals[k] * x[col_idx[k]];
        y[r] = acc;
    }
    return y;
}

Eigen::VectorXd CsrMatrix::diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
    for (int r = 0; r < rows; ++r)
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col_idx[k] == r) d[r] = vals[k];
    return d;
}

Eigen::MatrixXd CsrMatrix::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) m(r, col_idx[k]) += vals[k];
    return m;
}

double CsrMatrix::sum() const {
    double s = 0.0;
    for (double v : vals) s += v;
    return s;
}

double CsrMatrix::symmetry_defect() const {
    const Eigen::MatrixXd d = dense();
    return (d - d.transpose()).cwiseAbs().maxCoeff();
}

CsrMatrix csr_from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    m.col_idx.reserve(triplets.size());
    m.vals.reserve(triplets.size());
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r) {
        while (k < triplets.size() && triplets[k].row == r) {
            const int c = triplets[k].col;
            double acc = 0.0;
            while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c)
                acc += triplets[k++].val;
            m.col_idx.push_back(c);
            m.vals.push_back(acc);
        }
        m.row_ptr[r + 1] = static_cast<int>(m.col_idx.size());
    }
    return m;
}

Eigen::VectorXd solve_cg(const CsrMatrix& A, const Eigen::VectorXd& b, double rtol, int max_iter,
                         CgSummary* summary) {
    const int n = A.rows;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const double bnorm = b.norm();
    if (summary) *summary = {0, 0.0};
    if (bnorm == 0.0) return x;

    Eigen::VectorXd inv_diag = A.diagonal();
    for (int i = 0; i < n; ++i) inv_diag[i] = inv_diag[i] != 0.0 ? 1.0 / inv_diag[i] : 1.0;

    Eigen::VectorXd r = b;  // x = 0
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    double rnorm = r.norm();
    const double target = rtol * bnorm;

    int it = 0;
    while (rnorm > target && it < max_iter) {
        const Eigen::VectorXd Ap = A.apply(p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0))
            throw SolverError("solve_cg: matrix not positive definite (p'Ap=" +
                                  std::to_string(pAp) + ")",
                              it, rnorm);
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        rnorm = r.norm();
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++it;
    }
    if (summary) *summary = {it, rnorm};
    if (rnorm > target)
        throw SolverError("solve_cg: no convergence in " + std::to_string(max_iter) +
                              " iterations (residual " + std::to_string(rnorm) + ", target " +
                              std::to_string(target) + ")",
                          it, rnorm);
    return x;
}

}  // namespace podnet
