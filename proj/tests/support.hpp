// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for the unit and acceptance tests: random material draws,
// small random problems and norm helpers.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "smp/problem.hpp"

#ifndef SMP_PRESET_DIR
#define SMP_PRESET_DIR "presets"
#endif

namespace smp::test {

inline std::string preset(const std::string& name) { return std::string(SMP_PRESET_DIR) + "/" + name; }

inline double uniform(std::mt19937& rng, double lo, double hi)
{
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

inline double log_uniform(std::mt19937& rng, double lo, double hi)
{
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline PhaseConstants random_phase(std::mt19937& rng, double E_scale)
{
    PhaseConstants p;
    p.E_eq = E_scale * log_uniform(rng, 0.5, 2.0);
    p.E_neq = E_scale * log_uniform(rng, 0.2, 1.5);
    p.eta = E_scale * log_uniform(rng, 0.5, 20.0);
    p.alpha = uniform(rng, 0.5e-4, 3e-4);
    return p;
}

inline MaterialEndpoint random_endpoint(std::mt19937& rng, double scale)
{
    MaterialEndpoint m;
    m.rubbery = random_phase(rng, scale);
    m.glassy = random_phase(rng, 50.0 * scale);
    m.eta_i = scale * log_uniform(rng, 2.0, 50.0);
    m.T_g = uniform(rng, 330.0, 350.0);
    return m;
}

/// Random two-endpoint material; logistic phase law, optionally rho-dependent T_g.
inline PhaseParams random_params(std::mt19937& rng)
{
    PhaseParams p;
    p.lo = random_endpoint(rng, 1.0);
    p.hi = random_endpoint(rng, 3.0);
    p.nu = uniform(rng, 0.2, 0.4);
    p.penal = uniform(rng, 1.0, 4.0);
    p.rho_min = 1e-3;
    p.T_ref = uniform(rng, 330.0, 370.0);
    p.rho_dependent_phase = rng() % 2 == 0;
    p.phase_law.steepness = uniform(rng, 0.05, 0.4);
    return p;
}

inline Vec3 random_vec(std::mt19937& rng, double scale = 1e-2)
{
    return Vec3(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

inline StrainHistory random_history(std::mt19937& rng, int step)
{
    StrainHistory h;
    h.eps_r = random_vec(rng);
    h.eps_g = random_vec(rng);
    h.eps_ir = random_vec(rng);
    h.eps_ig = random_vec(rng);
    h.eps_i = random_vec(rng);
    h.eps_is = random_vec(rng);
    h.eps_th = random_vec(rng, 1e-3);
    h.step = step;
    return h;
}

/// Schedule that crosses the transition: load while cooling, then unload.
inline Schedule random_schedule(std::mt19937& rng, int steps)
{
    Schedule s;
    s.T_initial = 360.0;
    double T = 360.0;
    for (int n = 0; n < steps; ++n) {
        ScheduleStep st;
        st.dt = uniform(rng, 0.5, 2.0);
        T += uniform(rng, -20.0, 8.0);
        st.T = T;
        st.load_scale = n < (steps + 1) / 2 ? uniform(rng, 0.5, 1.5) : 0.0;
        st.phase = n < (steps + 1) / 2 ? "cool" : "relax";
        s.steps.push_back(st);
    }
    return s;
}

/// Cantilever with an axial-plus-shear edge load and a random design.
inline Problem random_problem(std::mt19937& rng, int nx, int ny, int steps)
{
    Problem pb;
    pb.nx = nx;
    pb.ny = ny;
    pb.lx = uniform(rng, 2.0, 6.0);
    pb.ly = uniform(rng, 0.5, 2.0);
    pb.bc.support.kind = SupportSpec::Kind::cantilever;
    pb.bc.load.kind = LoadSpec::Kind::edge;
    pb.bc.load.fx = uniform(rng, 0.01, 0.05);
    pb.bc.load.fy = uniform(rng, -0.01, 0.01);
    pb.params = random_params(rng);
    pb.schedule = random_schedule(rng, steps);
    pb.rho.resize(static_cast<std::size_t>(nx * ny));
    for (double& r : pb.rho) r = uniform(rng, 0.2, 0.8);
    pb.objective.node = {nx, ny};
    pb.objective.axis = 1;
    pb.objective.step = steps - 1;
    finalize_problem(pb);
    return pb;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b)
{
    return (a - b).cwiseAbs().maxCoeff();
}

/// max|a - b| / max(max|a|, max|b|); 0 when both vanish.
template <typename A, typename B>
double rel_diff(const A& a, const B& b)
{
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    const double d = max_abs_diff(a, b);
    return scale == 0 ? d : d / scale;
}

} // namespace smp::test
