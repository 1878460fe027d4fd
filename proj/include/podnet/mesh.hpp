#pragma once

#include <array>
#include <vector>

namespace podnet {

/// Uniform rectangular partition of the unit square with bilinear (Q1) nodes.
///
/// Nodes are numbered row-major: node(i,j) = j*(nx+1)+i at coordinates
/// (i*hx, j*hy). Elements are numbered row-major as well; element corner
/// nodes are listed counterclockwise starting at the lower-left corner.
/// Boundary nodes (any coordinate equal to 0 or 1) carry homogeneous
/// Dirichlet conditions everywhere in this project, and interior nodes are
/// mapped to a contiguous DOF numbering.
struct StructuredMesh {
    int nx = 0;  ///< elements along x
    int ny = 0;  ///< elements along y
    double hx = 0.0;
    double hy = 0.0;
    std::vector<bool> boundary;       ///< per node
    std::vector<int> interior_index;  ///< node -> interior DOF, -1 on boundary
    std::vector<int> interior_nodes;  ///< interior DOF -> node

    int n_nodes() const { return (nx + 1) * (ny + 1); }
    int n_elements() const { return nx * ny; }
    int n_interior() const { return static_cast<int>(interior_nodes.size()); }

    int node_id(int i, int j) const { return j * (nx + 1) + i; }

    std::array<double, 2> node_coord(int node) const {
        const int i = node % (nx + 1);
        const int j = node / (nx + 1);
        return {i * hx, j * hy};
    }

    /// Corner nodes of element e, counterclockwise from the SW corner.
    std::array<int, 4> element_nodes(int e) const {
        const int i = e % nx;
        const int j = e / nx;
        const int sw = j * (nx + 1) + i;
        return {sw, sw + 1, sw + nx + 2, sw + nx + 1};
    }

    /// Center coordinates of element e.
    std::array<double, 2> element_center(int e) const {
        const int i = e % nx;
        const int j = e / nx;
        return {(i + 0.5) * hx, (j + 0.5) * hy};
    }

    /// Nearest mesh node to a physical point (ties broken toward lower index).
    int nearest_node(double x, double y) const;
};

/// Builds the mesh. Requires nx, ny >= 2 so at least one interior DOF exists.
StructuredMesh build_mesh(int nx, int ny);

}  // namespace podnet
