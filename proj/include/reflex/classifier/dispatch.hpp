#pragma once

#include "reflex/classifier/engine.hpp"
#include "reflex/classifier/ruleset.hpp"
#include "reflex/telemetry/int_report.hpp"

#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace reflex::classify {

/// A report with the fields outside `fields` cleared. The flow key is always kept.
struct ProjectedReport {
    telemetry::IntReport report;
    FieldSet fields;

    bool has(ReportField f) const noexcept { return fields.test(static_cast<std::size_t>(f)); }
    bool operator==(const ProjectedReport&) const = default;
};

/// Link id used in classification keys: switch id in the high half, egress port in the low half.
FieldValue link_id(std::uint32_t switch_id, std::uint32_t egress_port) noexcept;

/// Key for a bare 5-tuple; extension fields are zero.
PacketKey flow_key(const telemetry::FlowKey& flow);

/// One key per hop. drop_reason is set only on the hop where the packet was dropped.
std::vector<PacketKey> report_keys(const telemetry::IntReport& report);

/// Best match over all hop keys of the report.
std::optional<Match> classify_report(const ClassifierEngine& engine, const telemetry::IntReport& report);
std::optional<Match> classify_report_linear(const RuleSet& ruleset, const telemetry::IntReport& report);

ProjectedReport project(const telemetry::IntReport& report, const FieldSet& fields);

/// One projected copy per destination of the matched action; empty when unmatched.
std::vector<std::pair<MonitorId, ProjectedReport>> dispatch(const telemetry::IntReport& report,
                                                            const std::optional<Match>& match);

/// Throws UnknownMonitor if a rule names a destination outside `known`.
void check_destinations(const RuleSet& ruleset, const std::set<MonitorId>& known);

}  // namespace reflex::classify
