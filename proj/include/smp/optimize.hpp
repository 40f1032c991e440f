// SPDX-License-Identifier: Apache-2.0
#pragma once

// Design update loop: sensitivity filter, optimality-criteria step under a
// volume constraint, iteration history.

#include <functional>
#include <string>
#include <vector>

#include "smp/problem.hpp"

namespace smp {

/// Normalized convolution over element centroids with weights
/// max(0, r_min - d), r_min in element widths (hx).
class SensitivityFilter {
public:
    SensitivityFilter(const Mesh& mesh, double r_min);

    std::vector<double> apply(const std::vector<double>& s) const;
    /// Row sums of the weight matrix; the sum of weight_sum[e] * filtered[e]
    /// equals the sum of weight_sum[e] * s[e].
    const std::vector<double>& weight_sum() const { return weight_sum_; }

private:
    struct Neighbor {
        int elem;
        double weight;
    };
    std::vector<std::vector<Neighbor>> neighbors_;
    std::vector<double> weight_sum_;
};

struct OcOptions {
    double volume_fraction = 0.3;
    double move = 0.2;
    double rho_min = 1e-3;
    double damping = 0.5;   // exponent on the OC ratio
    double volume_tol = 1e-6;
    int max_bisections = 200;
};

struct OcResult {
    std::vector<double> rho;
    double multiplier = 0;
    double volume = 0;
    int bisections = 0;
    bool shifted = false;  // sensitivities were shifted to be strictly negative
};

/// One OC step for minimization. Mixed-sign or positive sensitivities are
/// shifted by max(s) + 1e-9 * max|s| so every ratio is positive. Throws
/// OptimizerError when the volume target cannot be met.
OcResult oc_update(const std::vector<double>& rho, const std::vector<double>& sensitivity, const OcOptions& options);

double mean(const std::vector<double>& v);

struct OptRecord {
    int iteration = 0;
    double theta = 0;
    double volume = 0;      // after the update
    double max_change = 0;
    double wall_seconds = 0;
    int spot_elem = -1;     // paranoid check element, -1 when not run
    double spot_ne = 0;
    std::vector<double> rho;  // design after the update
};

struct OptimizeControl {
    int max_iters = 20;
    double tol = 1e-3;
    bool paranoid = false;
    double paranoid_gate = 1e-3;
    std::function<void(const OptRecord&)> on_iteration;
};

struct OptimizeResult {
    std::vector<double> rho;
    std::vector<OptRecord> history;
};

/// forward, adjoint, filter and OC until the max design change drops below
/// tol or max_iters is reached. Errors carry the iteration index.
OptimizeResult optimize_loop(const Problem& problem, const OptimizeControl& control);

/// History CSV; wall time omitted when `with_time` is false.
std::string history_csv(const std::vector<OptRecord>& history, bool with_time = true);

} // namespace smp
