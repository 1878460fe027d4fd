#include "podnet/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "podnet/common.hpp"

namespace podnet {

StructuredMesh build_mesh(int nx, int ny) {
    if (nx < 2 || ny < 2)
        throw Error("build_mesh: nx and ny must be >= 2 (got " + std::to_string(nx) + "x" +
                    std::to_string(ny) + "); no interior DOF otherwise");
    StructuredMesh mesh;
    mesh.nx = nx;
    mesh.ny = ny;
    mesh.hx = 1.0 / nx;
    mesh.hy = 1.0 / ny;
    const int n = mesh.n_nodes();
    mesh.boundary.assign(n, false);
    mesh.interior_index.assign(n, -1);
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const int node = mesh.node_id(i, j);
            const bool bdry = (i == 0 || i == nx || j == 0 || j == ny);
            mesh.boundary[node] = bdry;
            if (!bdry) {
                mesh.interior_index[node] = static_cast<int>(mesh.interior_nodes.size());
                mesh.interior_nodes.push_back(node);
            }
        }
    }
    return mesh;
}

int StructuredMesh::nearest_node(double x, double y) const {
    const int i = std::clamp(static_cast<int>(std::lround(x / hx)), 0, nx);
    const int j = std::clamp(static_cast<int>(std::lround(y / hy)), 0, ny);
    return node_id(i, j);
}

}  // namespace podnet
