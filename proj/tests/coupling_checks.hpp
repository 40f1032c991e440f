// SPDX-License-Identifier: Apache-2.0
#pragma once

// Coupling-block oracles: replay of the state-update kernels with a perturbed
// total strain, and the pairwise comparison of the two evaluators.

#include <algorithm>

#include "smp/adjoint.hpp"
#include "support.hpp"

namespace smp::test {

/// d sigma^k / d eps_total^i at one Gauss point, by replaying the material
/// updates from step i with a perturbed total strain. Every update is affine,
/// so a finite step is exact up to round-off.
inline Mat3 coupling_by_replay(const ForwardTrace& trace, int k, int i, int elem, int gp)
{
    const double h = 1e-3;
    Mat3 out;
    for (int c = 0; c < 3; ++c) {
        Vec3 sig[2];
        for (int side = 0; side < 2; ++side) {
            StrainHistory hist = trace.history_before(i, elem, gp);
            StrainHistory before = hist;
            for (int s = i; s <= k; ++s) {
                const auto& rec = trace.steps[s];
                const auto dofs = trace.mesh.element_dofs(elem);
                Eigen::Matrix<double, 8, 1> ue;
                for (int a = 0; a < 8; ++a) ue[a] = rec.u[dofs[a]];
                Vec3 eps = trace.B[elem * kGaussPoints + gp].B * ue;
                if (s == i) eps[c] += side == 0 ? h : -h;
                before = hist;
                hist = state_update<double>(rec.coeffs[elem], eps, hist, rec.eps_th[elem]);
            }
            sig[side] = stress<double>(trace.steps[k].coeffs[elem], hist.eps_r, before.eps_ir);
        }
        out.col(c) = (sig[0] - sig[1]) / (2 * h);
    }
    return out;
}

/// Small random trace: up to `max_steps` steps on a mesh of at most
/// `max_elements` elements.
inline ForwardTrace random_trace(std::mt19937& rng, int max_steps, int max_elements)
{
    const int steps = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_steps - 1));
    int nx, ny;
    do {
        nx = 1 + static_cast<int>(rng() % 10);
        ny = 1 + static_cast<int>(rng() % 5);
    } while (nx * ny > max_elements);
    const Problem pb = random_problem(rng, nx, ny, steps);
    return run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
}

struct ModeComparison {
    double worst = 0;
    long pairs = 0;
};

/// Worst relative difference between the depth-first and memoized couplings
/// over every (k, i, elem) of a trace.
inline ModeComparison compare_coupling_modes(const ForwardTrace& trace)
{
    const auto ctx = make_coupling_context(trace, std::max(trace.num_steps(), 1));
    ModeComparison out;
    for (int e = 0; e < trace.mesh.num_elements(); ++e) {
        CouplingCache cache(e);
        for (int i = 0; i < trace.num_steps(); ++i) {
            for (int k = i + 1; k < trace.num_steps(); ++k) {
                const ElementBlock r = coupling_recursive(ctx, k, i, e);
                const ElementBlock m = coupling_memoized(ctx, k, i, e, cache);
                out.worst = std::max(out.worst, rel_diff(r, m));
                ++out.pairs;
            }
        }
    }
    return out;
}

} // namespace smp::test
