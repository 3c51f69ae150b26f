#pragma once

#include <cstdint>

namespace reflex::monitor {

struct MonitorBudget {
    std::uint64_t cycles = 0;        ///< floor(core_hz / reports_per_s)
    std::uint64_t instructions = 0;  ///< at one instruction per cycle
    double ns_per_report = 0.0;
};

/// Per-report processing budget for a core keeping up with a report stream.
/// Throws MonitorError for non-positive inputs.
MonitorBudget monitor_budget(double reports_per_s, double core_hz);

}  // namespace reflex::monitor
