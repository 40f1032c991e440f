// SPDX-License-Identifier: Apache-2.0
#include "smp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smp/errors.hpp"

namespace smp {

std::array<int, 8> Mesh::element_dofs(int elem) const
{
    const auto& n = elements.at(elem);
    return {2 * n[0], 2 * n[0] + 1, 2 * n[1], 2 * n[1] + 1, 2 * n[2], 2 * n[2] + 1, 2 * n[3], 2 * n[3] + 1};
}

Eigen::Vector2d Mesh::centroid(int elem) const
{
    const auto& n = elements.at(elem);
    return 0.25 * (nodes[n[0]] + nodes[n[1]] + nodes[n[2]] + nodes[n[3]]);
}

Mesh build_mesh(int nx, int ny, double lx, double ly, const BcSpec& bc, double thickness)
{
    if (nx < 1 || ny < 1) throw ConfigError("mesh: nx and ny must be >= 1");
    if (!(lx > 0) || !(ly > 0) || !(thickness > 0)) throw ConfigError("mesh: dimensions must be positive");

    Mesh m;
    m.nx = nx;
    m.ny = ny;
    m.lx = lx;
    m.ly = ly;
    m.thickness = thickness;
    m.hx = lx / nx;
    m.hy = ly / ny;
    m.nodes.resize(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int ix = 0; ix <= nx; ++ix)
        for (int iy = 0; iy <= ny; ++iy) m.nodes[m.node_id(ix, iy)] = {ix * m.hx, iy * m.hy};
    m.elements.resize(static_cast<std::size_t>(nx * ny));
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            m.elements[m.element_id(ix, iy)] = {m.node_id(ix, iy), m.node_id(ix + 1, iy), m.node_id(ix + 1, iy + 1),
                                                m.node_id(ix, iy + 1)};
    m.num_dofs = 2 * m.num_nodes();

    switch (bc.support.kind) {
    case SupportSpec::Kind::cantilever:
        for (int iy = 0; iy <= ny; ++iy) {
            m.fixed_dofs.push_back(2 * m.node_id(0, iy));
            m.fixed_dofs.push_back(2 * m.node_id(0, iy) + 1);
        }
        break;
    case SupportSpec::Kind::roller:
        for (int iy = 0; iy <= ny; ++iy) m.fixed_dofs.push_back(2 * m.node_id(0, iy));
        m.fixed_dofs.push_back(2 * m.node_id(0, 0) + 1);
        break;
    }
    std::sort(m.fixed_dofs.begin(), m.fixed_dofs.end());
    m.free_index.assign(static_cast<std::size_t>(m.num_dofs), -1);
    for (int d = 0, f = 0; d < m.num_dofs; ++d) {
        if (std::binary_search(m.fixed_dofs.begin(), m.fixed_dofs.end(), d)) continue;
        m.free_index[d] = f++;
        m.free_dofs.push_back(d);
    }

    m.reference_load = Eigen::VectorXd::Zero(m.num_dofs);
    const auto& load = bc.load;
    if (load.kind == LoadSpec::Kind::node) {
        if (load.node.ix < 0 || load.node.ix > nx || load.node.iy < 0 || load.node.iy > ny) {
            throw ConfigError("bc: load node (" + std::to_string(load.node.ix) + ", " +
                              std::to_string(load.node.iy) + ") is outside the mesh");
        }
        const int n = m.node_id(load.node.ix, load.node.iy);
        m.reference_load[2 * n] = load.fx;
        m.reference_load[2 * n + 1] = load.fy;
    } else {
        for (int iy = 0; iy < ny; ++iy) {
            for (int end : {iy, iy + 1}) {
                const int n = m.node_id(nx, end);
                m.reference_load[2 * n] += 0.5 * load.fx / ny;
                m.reference_load[2 * n + 1] += 0.5 * load.fy / ny;
            }
        }
    }
    for (int d : m.fixed_dofs) {
        if (m.reference_load[d] != 0.0) {
            throw ConfigError("bc: load applied to fixed dof " + std::to_string(d));
        }
    }
    return m;
}

BMatrix element_B(const Mesh& mesh, int elem, int gp)
{
    if (gp < 0 || gp >= kGaussPoints) throw AssemblyError("element_B: Gauss point index out of range");
    static const double g = 1.0 / std::sqrt(3.0);
    static const double xi_pts[4] = {-g, g, g, -g};
    static const double eta_pts[4] = {-g, -g, g, g};
    static const double xi_n[4] = {-1, 1, 1, -1};
    static const double eta_n[4] = {-1, -1, 1, 1};
    const double xi = xi_pts[gp];
    const double eta = eta_pts[gp];

    const auto& conn = mesh.elements.at(elem);
    Eigen::Matrix<double, 2, 4> dN_dnat;
    for (int a = 0; a < 4; ++a) {
        dN_dnat(0, a) = 0.25 * xi_n[a] * (1 + eta_n[a] * eta);
        dN_dnat(1, a) = 0.25 * eta_n[a] * (1 + xi_n[a] * xi);
    }
    Eigen::Matrix<double, 4, 2> coords;
    for (int a = 0; a < 4; ++a) coords.row(a) = mesh.nodes[conn[a]].transpose();
    const Eigen::Matrix2d J = dN_dnat * coords;
    const double detJ = J.determinant();
    if (!(detJ > 0)) throw AssemblyError("element " + std::to_string(elem) + " has non-positive Jacobian");
    const Eigen::Matrix<double, 2, 4> dN = J.inverse() * dN_dnat;

    BMatrix out;
    out.B.setZero();
    for (int a = 0; a < 4; ++a) {
        out.B(0, 2 * a) = dN(0, a);
        out.B(1, 2 * a + 1) = dN(1, a);
        out.B(2, 2 * a) = dN(1, a);
        out.B(2, 2 * a + 1) = dN(0, a);
    }
    out.weight = detJ * mesh.thickness;
    return out;
}

std::vector<BMatrix> element_B_table(const Mesh& mesh)
{
    std::vector<BMatrix> table;
    table.reserve(static_cast<std::size_t>(mesh.num_elements() * kGaussPoints));
    for (int e = 0; e < mesh.num_elements(); ++e)
        for (int q = 0; q < kGaussPoints; ++q) table.push_back(element_B(mesh, e, q));
    return table;
}

} // namespace smp
