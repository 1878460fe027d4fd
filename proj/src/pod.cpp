#include "podnet/pod.hpp"

#include <cmath>
#include <set>
#include <string>

#include "podnet/common.hpp"

namespace podnet {

SnapshotMatrix collect_snapshots(const std::vector<Eigen::MatrixXd>& runs,
                                 const StructuredMesh& mesh) {
    if (runs.empty()) throw Error("collect_snapshots: no runs");
    Eigen::Index total = 0;
    for (const auto& run : runs) {
        if (run.rows() != mesh.n_nodes())
            throw Error("collect_snapshots: trajectory dimension mismatch");
        total += run.cols();
    }
    SnapshotMatrix snap;
    snap.phi.resize(mesh.n_interior(), total);
    snap.meta.reserve(static_cast<std::size_t>(total));
    Eigen::Index col = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (Eigen::Index t = 0; t < runs[r].cols(); ++t, ++col) {
            snap.phi.col(col) = restrict_interior(runs[r].col(t), mesh);
            snap.meta.push_back({static_cast<int>(r), static_cast<int>(t)});
        }
    }
    return snap;
}

PodBasis compute_pod(const SnapshotMatrix& snapshots, int m) {
    const Eigen::Index n = snapshots.phi.rows();
    const Eigen::Index N = snapshots.phi.cols();
    if (N < 1) throw Error("compute_pod: empty snapshot matrix");
    if (m < 1 || m > N) throw Error("compute_pod: need 1 <= m <= snapshot count");

    const Eigen::MatrixXd C = snapshots.phi.transpose() * snapshots.phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) throw Error("compute_pod: eigensolver failed");

    // Eigenvalues come back ascending; take the top m in descending order.
    PodBasis pod;
    pod.modes.resize(n, m);
    pod.sigma.resize(m);
    pod.eigvecs.resize(N, m);
    const double sigma1 = std::sqrt(std::max(0.0, eig.eigenvalues()[N - 1]));
    for (int j = 0; j < m; ++j) {
        const Eigen::Index src = N - 1 - j;
        const double sigma = std::sqrt(std::max(0.0, eig.eigenvalues()[src]));
        if (sigma1 <= 0.0 || sigma < 1e-12 * sigma1)
            throw Error("compute_pod: snapshot rank below m, reduce the mode count");
        Eigen::VectorXd w = eig.eigenvectors().col(src);
        Eigen::VectorXd xi = snapshots.phi * w / sigma;
        // Sign convention: the entry of largest magnitude is positive.
        Eigen::Index imax = 0;
        xi.cwiseAbs().maxCoeff(&imax);
        if (xi[imax] < 0.0) {
            xi = -xi;
            w = -w;
        }
        pod.modes.col(j) = xi;
        pod.sigma[j] = sigma;
        pod.eigvecs.col(j) = w;
    }
    return pod;
}

std::vector<int> select_observation_nodes(const StructuredMesh& mesh,
                                          const std::vector<std::array<double, 2>>& points) {
    std::vector<int> nodes;
    std::set<int> seen;
    for (const auto& p : points) {
        const int node = mesh.nearest_node(p[0], p[1]);
        if (mesh.boundary[static_cast<std::size_t>(node)])
            throw Error("select_observation_nodes: point snaps to a boundary node");
        if (!seen.insert(node).second)
            throw Error("select_observation_nodes: duplicate observation node");
        nodes.push_back(node);
    }
    return nodes;
}

std::vector<int> select_observation_nodes(const StructuredMesh& mesh, int count) {
    if (count != 5)
        throw Error("select_observation_nodes: no default layout for count " +
                    std::to_string(count));
    return select_observation_nodes(
        mesh, {{{0.5, 0.5}, {0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}}});
}

NodalBasis build_nodal_basis(const PodBasis& pod, const std::vector<int>& nodes,
                             const StructuredMesh& mesh) {
    const int m = pod.n_modes();
    if (static_cast<int>(nodes.size()) != m)
        throw Error("build_nodal_basis: need exactly one node per mode");
    if (pod.modes.rows() != mesh.n_interior())
        throw Error("build_nodal_basis: modes do not match mesh");

    NodalBasis basis;
    basis.nodes = nodes;
    basis.node_rows.reserve(nodes.size());
    Eigen::MatrixXd Xi(m, m);  // Xi(k, j) = xi_j(x_k)
    for (int k = 0; k < m; ++k) {
        const int row = mesh.interior_index[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])];
        if (row < 0) throw Error("build_nodal_basis: observation node on the boundary");
        basis.node_rows.push_back(row);
        Xi.row(k) = pod.modes.row(row);
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xi);
    const double smin = svd.singularValues()[m - 1];
    const double smax = svd.singularValues()[0];
    if (!(smin > 0.0) || smax / smin > 1e8)
        throw Error("build_nodal_basis: node-value matrix ill-conditioned, "
                    "choose different nodes or mode count");

    const Eigen::MatrixXd Xi_inv = Xi.fullPivLu().inverse();
    basis.alpha = Xi_inv.transpose();
    basis.psi = pod.modes * Xi_inv;

    double defect = 0.0;
    for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l)
            defect = std::max(defect, std::abs(basis.psi(basis.node_rows[static_cast<std::size_t>(l)], k) -
                                               (k == l ? 1.0 : 0.0)));
    if (defect > 1e-10)
        throw Error("build_nodal_basis: interpolation residual " + std::to_string(defect) +
                    " exceeds tolerance, choose different nodes or mode count");
    return basis;
}

ProjectedSystem project_system(const NodalBasis& basis, const CsrMatrix& M, const CsrMatrix& A,
                               const Eigen::VectorXd& b) {
    const Eigen::Index n = basis.psi.rows();
    const int m = basis.n_modes();
    if (M.rows != n || M.cols != n || A.rows != n || A.cols != n || b.size() != n)
        throw Error("project_system: dimension mismatch");

    Eigen::MatrixXd MPsi(n, m), APsi(n, m);
    for (int j = 0; j < m; ++j) {
        MPsi.col(j) = M.apply(basis.psi.col(j));
        APsi.col(j) = A.apply(basis.psi.col(j));
    }
    ProjectedSystem out;
    out.M = basis.psi.transpose() * MPsi;
    out.A = basis.psi.transpose() * APsi;
    out.b = basis.psi.transpose() * b;

    const Eigen::LLT<Eigen::MatrixXd> llt(out.M);
    if (llt.info() != Eigen::Success)
        throw Error("project_system: projected mass not positive definite (rank-deficient basis)");
    return out;
}

RomWorkspace make_rom_workspace(const DiffusionProblem& problem, const NodalBasis& basis) {
    RomWorkspace ws;
    ws.mesh = build_mesh(problem.kappa.nx, problem.kappa.ny);
    if (basis.psi.rows() != ws.mesh.n_interior())
        throw Error("make_rom_workspace: basis does not match mesh");
    ws.mass_int = restrict_interior(assemble_mass(ws.mesh), ws.mesh);
    Eigen::MatrixXd MPsi(basis.psi.rows(), basis.n_modes());
    for (int j = 0; j < basis.n_modes(); ++j) MPsi.col(j) = ws.mass_int.apply(basis.psi.col(j));
    ws.M_tilde = basis.psi.transpose() * MPsi;
    return ws;
}

Eigen::VectorXd step_rom(const RomWorkspace& ws, const NodalBasis& basis,
                         const DiffusionProblem& problem, const Eigen::VectorXd& c_n,
                         double t_next) {
    const int m = basis.n_modes();
    if (c_n.size() != m) throw Error("step_rom: coefficient dimension mismatch");
    if (!c_n.allFinite()) throw Error("step_rom: non-finite coefficients");

    const Eigen::VectorXd u_lag = prolong_interior(reconstruct(basis, c_n), ws.mesh);
    const CsrMatrix A_int =
        restrict_interior(assemble_stiffness(ws.mesh, problem.kappa, u_lag, problem.alpha),
                          ws.mesh);
    const Eigen::VectorXd b_int =
        restrict_interior(assemble_load(ws.mesh, problem.source, t_next), ws.mesh);

    Eigen::MatrixXd APsi(basis.psi.rows(), m);
    for (int j = 0; j < m; ++j) APsi.col(j) = A_int.apply(basis.psi.col(j));
    const Eigen::MatrixXd A_tilde = basis.psi.transpose() * APsi;
    const Eigen::VectorXd b_tilde = basis.psi.transpose() * b_int;

    const Eigen::MatrixXd S = ws.M_tilde + problem.dt * A_tilde;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible())
        throw SolverError("step_rom: reduced system singular", 0, 0.0);
    return lu.solve(ws.M_tilde * c_n + problem.dt * b_tilde);
}

Eigen::MatrixXd run_rom_trajectory(const DiffusionProblem& problem, const NodalBasis& basis,
                                   const Eigen::VectorXd& c0) {
    const RomWorkspace ws = make_rom_workspace(problem, basis);
    if (!(problem.dt > 0.0) || problem.n_steps < 1)
        throw Error("run_rom_trajectory: invalid time grid");
    Eigen::MatrixXd traj(basis.n_modes(), problem.n_steps + 1);
    traj.col(0) = c0;
    for (int n = 0; n < problem.n_steps; ++n)
        traj.col(n + 1) = step_rom(ws, basis, problem, traj.col(n), (n + 1) * problem.dt);
    return traj;
}

Eigen::VectorXd reconstruct(const NodalBasis& basis, const Eigen::VectorXd& c) {
    if (c.size() != basis.n_modes()) throw Error("reconstruct: coefficient dimension mismatch");
    return basis.psi * c;
}

Eigen::VectorXd sample_at_nodes(const NodalBasis& basis, const Eigen::VectorXd& interior) {
    if (interior.size() != basis.psi.rows())
        throw Error("sample_at_nodes: field dimension mismatch");
    Eigen::VectorXd out(static_cast<Eigen::Index>(basis.node_rows.size()));
    for (std::size_t k = 0; k < basis.node_rows.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = interior[basis.node_rows[k]];
    return out;
}

}  // namespace podnet
