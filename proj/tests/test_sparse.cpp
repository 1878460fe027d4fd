#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "podnet/common.hpp"
#include "podnet/sparse.hpp"

using namespace podnet;

TEST_SUITE("sparse") {

TEST_CASE("triplet assembly sums duplicates and sorts columns") {
    std::vector<Triplet> trips = {{0, 1, 2.0}, {1, 0, 3.0}, {0, 1, 0.5}, {0, 0, 1.0},
                                  {1, 1, 4.0}};
    const CsrMatrix A = csr_from_triplets(2, 2, trips);
    const Eigen::MatrixXd D = A.dense();
    CHECK(D(0, 0) == 1.0);
    CHECK(D(0, 1) == 2.5);
    CHECK(D(1, 0) == 3.0);
    CHECK(D(1, 1) == 4.0);
    for (int r = 0; r < A.rows; ++r)
        for (int k = A.row_ptr[static_cast<std::size_t>(r)] + 1;
             k < A.row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
            CHECK(A.col_idx[static_cast<std::size_t>(k)] >
                  A.col_idx[static_cast<std::size_t>(k) - 1]);
}

TEST_CASE("apply matches the dense product") {
    std::vector<Triplet> trips;
    const int n = 7;
    for (int i = 0; i < n; ++i) {
        trips.push_back({i, i, 2.0 + i});
        if (i + 1 < n) {
            trips.push_back({i, i + 1, -1.0});
            trips.push_back({i + 1, i, -1.0});
        }
    }
    const CsrMatrix A = csr_from_triplets(n, n, trips);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = std::sin(1.0 + i);
    CHECK((A.apply(x) - A.dense() * x).norm() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(A.symmetry_defect() == 0.0);
    CHECK((A.diagonal() - A.dense().diagonal()).norm() == 0.0);
}

TEST_CASE("conjugate gradient solves SPD systems to the requested residual") {
    std::vector<Triplet> trips;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
        trips.push_back({i, i, 4.0});
        if (i + 1 < n) {
            trips.push_back({i, i + 1, -1.0});
            trips.push_back({i + 1, i, -1.0});
        }
    }
    const CsrMatrix A = csr_from_triplets(n, n, trips);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = std::cos(0.3 * i);
    CgSummary summary;
    const Eigen::VectorXd x = solve_cg(A, b, 1e-12, 10 * n, &summary);
    CHECK((A.apply(x) - b).norm() <= 1e-12 * b.norm());
    CHECK(summary.iterations > 0);
    const Eigen::VectorXd exact = A.dense().ldlt().solve(b);
    CHECK((x - exact).norm() / exact.norm() < 1e-10);
}

TEST_CASE("conjugate gradient reports breakdown on indefinite systems") {
    std::vector<Triplet> trips = {{0, 0, 1.0}, {1, 1, -1.0}};
    const CsrMatrix A = csr_from_triplets(2, 2, trips);
    Eigen::VectorXd b(2);
    b << 1.0, 1.0;
    CHECK_THROWS_AS(solve_cg(A, b, 1e-12, 100), SolverError);
}

TEST_CASE("conjugate gradient reports iteration-cap exhaustion") {
    std::vector<Triplet> trips;
    const int n = 50;
    for (int i = 0; i < n; ++i) {
        trips.push_back({i, i, 2.0});
        if (i + 1 < n) {
            trips.push_back({i, i + 1, -1.0});
            trips.push_back({i + 1, i, -1.0});
        }
    }
    const CsrMatrix A = csr_from_triplets(n, n, trips);
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
    CHECK_THROWS_AS(solve_cg(A, b, 1e-14, 2), SolverError);
    try {
        solve_cg(A, b, 1e-14, 2);
    } catch (const SolverError& e) {
        CHECK(e.iterations == 2);
        CHECK(e.residual > 0.0);
    }
}

}  // TEST_SUITE
