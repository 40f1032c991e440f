// SPDX-License-Identifier: Apache-2.0
#include "smp/schedule.hpp"

#include <cmath>

#include "smp/errors.hpp"

namespace smp {

void Schedule::validate() const
{
    if (steps.empty()) throw ConfigError("schedule: at least one step is required");
    if (!std::isfinite(T_initial)) throw ConfigError("schedule: T_initial must be finite");
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const auto& st = steps[s];
        const std::string where = "schedule.steps[" + std::to_string(s) + "]";
        if (!(st.dt > 0) || !std::isfinite(st.dt)) throw ConfigError(where + ".dt must be > 0");
        if (!std::isfinite(st.T)) throw ConfigError(where + ".T must be finite");
        if (!std::isfinite(st.load_scale)) throw ConfigError(where + ".load_scale must be finite");
    }
}

Schedule Schedule::cycled(int n) const
{
    if (steps.empty()) throw ConfigError("schedule: cannot cycle an empty schedule");
    Schedule out;
    out.T_initial = T_initial;
    for (int s = 0; s < n; ++s) out.steps.push_back(steps[static_cast<std::size_t>(s) % steps.size()]);
    return out;
}

} // namespace smp
