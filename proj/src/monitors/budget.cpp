#include "reflex/monitors/budget.hpp"

#include "reflex/monitors/command.hpp"

#include <cmath>

namespace reflex::monitor {

MonitorBudget monitor_budget(double reports_per_s, double core_hz) {
    if (!(reports_per_s > 0) || !(core_hz > 0)) {
        throw MonitorError(MonitorError::Code::ZeroInput, "report rate and core frequency must be > 0");
    }
    MonitorBudget b;
    b.cycles = static_cast<std::uint64_t>(std::floor(core_hz / reports_per_s));
    b.instructions = b.cycles;
    b.ns_per_report = 1e9 / reports_per_s;
    return b;
}

}  // namespace reflex::monitor
