#pragma once

#include "reflex/classifier/dispatch.hpp"
#include "reflex/monitors/command.hpp"

#include <optional>
#include <string_view>

namespace reflex::monitor {

/// A fixed limit on one report field. Utilization limits are fractions and
/// are compared in the report's fixed-point units.
struct ThresholdSpec {
    classify::ReportField field = classify::ReportField::QueueDepth;
    std::int64_t limit = 0;  ///< in field units (utilization scaled by 1e4)

    /// Throws MonitorError::UnknownField for names that are not numeric report fields.
    static ThresholdSpec parse(std::string_view field, double limit);
};

/// Largest value of the field over the report, with the hop it came from
/// (hop 0 for report-level fields).
std::pair<std::int64_t, std::size_t> field_value(const telemetry::IntReport& report, classify::ReportField field);

/// Stateless: emits SetParam("alert.<field>", value) at the offending switch
/// iff the value strictly exceeds the limit.
std::optional<ReflexCommand> threshold_observe(const telemetry::IntReport& report, const ThresholdSpec& spec,
                                               const MonitorId& origin, std::uint64_t command_id, VirtualTime now);

class ThresholdMonitor {
public:
    ThresholdMonitor(MonitorId id, ThresholdSpec spec, std::uint64_t id_base = command_id_base(0))
        : id_(std::move(id)), spec_(spec), ids_(id_base) {}

    /// Throws UnknownField if the projection dropped the watched field.
    std::optional<ReflexCommand> observe(const classify::ProjectedReport& report, VirtualTime now);
    const MonitorId& id() const noexcept { return id_; }

private:
    MonitorId id_;
    ThresholdSpec spec_;
    CommandIds ids_;
};

}  // namespace reflex::monitor
