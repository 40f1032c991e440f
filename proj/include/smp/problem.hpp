// SPDX-License-Identifier: Apache-2.0
#pragma once

// Problem bundle parsed from a JSON run configuration, plus the two
// pipelines built on it: objective evaluation and adjoint sensitivity.

#include <string>
#include <vector>

#include "smp/adjoint.hpp"
#include "smp/fea.hpp"

namespace smp {

struct ObjectiveSpec {
    NodeRef node;
    int axis = 1;  // 0 = x, 1 = y
    int step = 0;  // M
    int dof = -1;  // resolved global dof
};

enum class FdScheme { forward, central };

/// Scalar type of the perturbed forward runs.
enum class FdPrecision { binary64, extended, quad };

struct VerifySettings {
    FdScheme scheme = FdScheme::central;
    double h = 1e-6;
    bool relative_step = false;       // h * max(rho_e, 0.1) when set
    double near_zero = 1e-6;          // omit |FD| < near_zero * max|FD|
    double gate = 1e-5;               // max NE accepted
    FdPrecision precision = FdPrecision::quad;
};

struct OptimizeSettings {
    double volume_fraction = 0.3;
    double r_min = 1.5;  // element widths
    double move = 0.2;
    int max_iters = 20;
    double tol = 1e-3;
    unsigned seed = 1;
};

struct BenchSettings {
    std::vector<int> steps{2, 4, 6, 8};
    bool recursive = true;
    bool memoized = true;
    int repeats = 1;
    int memoized_max_steps = 32;
};

struct Problem {
    int nx = 0, ny = 0;
    double lx = 0, ly = 0, thickness = 1;
    BcSpec bc;
    Mesh mesh;
    PhaseParams params;
    Schedule schedule;
    std::vector<double> rho;
    ObjectiveSpec objective;
    SolverOptions solver;
    AdjointOptions adjoint;
    VerifySettings verify;
    OptimizeSettings optimize;
    BenchSettings bench;
    std::string out_dir = "out";
    std::vector<std::string> defaults_applied;  // "key = value" for every defaulted field
};

/// Throws ConfigError naming the key on schema or cross-reference failures.
Problem parse_config(const std::string& path);
Problem parse_config_text(const std::string& text, const std::string& origin = "<string>");

/// Re-derives mesh and objective dof after edits to the geometry fields.
void finalize_problem(Problem& problem);

/// Schedule cut after the objective step; later steps cannot affect theta.
Schedule objective_schedule(const Problem& problem);

/// theta for a design, evaluated with scalar type Real.
template <typename Real>
Real evaluate_objective(const Problem& problem, const std::vector<double>& rho);

struct SensitivityResult {
    ForwardTrace trace;
    AdjointState adjoint;
    std::vector<double> sensitivity;
    double theta = 0;
};

SensitivityResult adjoint_sensitivity(const Problem& problem, const std::vector<double>& rho);

} // namespace smp
