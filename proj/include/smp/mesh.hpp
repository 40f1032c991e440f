// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace smp {

struct NodeRef {
    int ix = 0;
    int iy = 0;
};

struct SupportSpec {
    // cantilever: both dofs of every node on x = 0 fixed.
    // roller: x dofs on x = 0 fixed plus the y dof of the node at the origin.
    enum class Kind { cantilever, roller };
    Kind kind = Kind::cantilever;
};

struct LoadSpec {
    // edge: consistent nodal forces of a uniform traction on the x = lx edge.
    // node: a point force at `node`.
    enum class Kind { edge, node };
    Kind kind = Kind::edge;
    NodeRef node;
    double fx = 0;  // total reference force (N)
    double fy = 0;
};

struct BcSpec {
    SupportSpec support;
    LoadSpec load;
};

/// Structured Q4 grid. Nodes and elements are numbered column by column
/// (index = ix * rows + iy), dof 2n is x and 2n + 1 is y.
struct Mesh {
    int nx = 0, ny = 0;
    double lx = 0, ly = 0, thickness = 1;
    double hx = 0, hy = 0;

    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 4>> elements;  // counter-clockwise from lower left

    int num_dofs = 0;
    std::vector<int> fixed_dofs;  // sorted
    std::vector<int> free_dofs;   // sorted
    std::vector<int> free_index;  // dof -> position in free_dofs, -1 if fixed
    Eigen::VectorXd reference_load;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(elements.size()); }
    int num_free() const { return static_cast<int>(free_dofs.size()); }
    int node_id(int ix, int iy) const { return ix * (ny + 1) + iy; }
    int element_id(int ix, int iy) const { return ix * ny + iy; }
    std::array<int, 8> element_dofs(int elem) const;
    Eigen::Vector2d centroid(int elem) const;
};

/// Throws ConfigError for invalid dimensions or node references.
Mesh build_mesh(int nx, int ny, double lx, double ly, const BcSpec& bc, double thickness = 1.0);

/// Strain-displacement operator at one Gauss point with its integration
/// weight (Gauss weight x det J x thickness).
struct BMatrix {
    Eigen::Matrix<double, 3, 8> B;
    double weight = 0;
};

inline constexpr int kGaussPoints = 4;

/// gp indexes the 2x2 Gauss set. Throws AssemblyError for degenerate geometry.
BMatrix element_B(const Mesh& mesh, int elem, int gp);

/// B for every element and Gauss point, indexed [elem * 4 + gp].
std::vector<BMatrix> element_B_table(const Mesh& mesh);

} // namespace smp
