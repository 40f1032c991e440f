// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace smp {

struct ScheduleStep {
    double dt = 1.0;          // step duration (s)
    double T = 300.0;         // temperature at the end of the step (K)
    double load_scale = 0.0;  // multiplies the mesh reference load
    std::string phase;        // load | cool | relax | heat (informational)
};

/// Ordered thermo-mechanical programme. Step s is solved with the history
/// left by step s - 1; the temperature before step 0 is T_initial.
struct Schedule {
    std::vector<ScheduleStep> steps;
    double T_initial = 300.0;

    int size() const { return static_cast<int>(steps.size()); }
    double T_before(int s) const { return s == 0 ? T_initial : steps.at(s - 1).T; }

    /// Throws ConfigError on an empty schedule, dt <= 0 or non-finite values.
    void validate() const;

    /// Repeats the step list cyclically until it holds `n` steps.
    Schedule cycled(int n) const;
};

} // namespace smp
