#include "reflex/monitors/threshold.hpp"

#include <cmath>

namespace reflex::monitor {

using classify::ReportField;

ThresholdSpec ThresholdSpec::parse(std::string_view field, double limit) {
    const auto f = classify::parse_report_field(field);
    if (!f || *f == ReportField::Drop || *f == ReportField::Timestamp) {
        throw MonitorError(MonitorError::Code::UnknownField, "no numeric report field named '" + std::string(field) + "'");
    }
    ThresholdSpec spec;
    spec.field = *f;
    spec.limit = *f == ReportField::LinkUtilization ? std::llround(limit * telemetry::kUtilizationScale)
                                                    : static_cast<std::int64_t>(std::floor(limit));
    return spec;
}

std::pair<std::int64_t, std::size_t> field_value(const telemetry::IntReport& report, ReportField field) {
    switch (field) {
        case ReportField::Seq:
            return {static_cast<std::int64_t>(report.seq), 0};
        case ReportField::PktSize:
            return {report.pkt_size_bytes, 0};
        default:
            break;
    }
    std::int64_t best = 0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < report.hops.size(); ++i) {
        const auto& h = report.hops[i];
        std::int64_t v = 0;
        switch (field) {
            case ReportField::SwitchId: v = h.switch_id; break;
            case ReportField::IngressPort: v = h.ingress_port; break;
            case ReportField::EgressPort: v = h.egress_port; break;
            case ReportField::QueueId: v = h.queue_id; break;
            case ReportField::QueueDepth: v = h.queue_depth; break;
            case ReportField::HopLatency: v = static_cast<std::int64_t>(h.hop_latency_ns); break;
            case ReportField::LinkUtilization: v = h.utilization_e4; break;
            case ReportField::Timestamp: v = static_cast<std::int64_t>(h.timestamp_ns); break;
            default: break;
        }
        if (i == 0 || v > best) {
            best = v;
            at = i;
        }
    }
    return {best, at};
}

std::optional<ReflexCommand> threshold_observe(const telemetry::IntReport& report, const ThresholdSpec& spec,
                                               const MonitorId& origin, std::uint64_t command_id, VirtualTime now) {
    if (report.hops.empty()) {
        return std::nullopt;
    }
    const auto [value, hop] = field_value(report, spec.field);
    if (value <= spec.limit) {
        return std::nullopt;
    }
    return ReflexCommand{command_id, origin, now, report.hops[hop].switch_id,
                         SetParam{"alert." + std::string(classify::to_string(spec.field)), value}};
}

std::optional<ReflexCommand> ThresholdMonitor::observe(const classify::ProjectedReport& report, VirtualTime now) {
    if (!report.has(spec_.field)) {
        throw MonitorError(MonitorError::Code::UnknownField,
                           "field '" + std::string(classify::to_string(spec_.field)) + "' is not in the projection");
    }
    auto cmd = threshold_observe(report.report, spec_, id_, 0, now);
    if (cmd) {
        cmd->command_id = ids_.next();
    }
    return cmd;
}

}  // namespace reflex::monitor
