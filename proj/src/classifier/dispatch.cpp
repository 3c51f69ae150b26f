#include "reflex/classifier/dispatch.hpp"

namespace reflex::classify {

using telemetry::IntReport;

FieldValue link_id(std::uint32_t switch_id, std::uint32_t egress_port) noexcept {
    return (switch_id << 16) | (egress_port & 0xffffU);
}

PacketKey flow_key(const telemetry::FlowKey& flow) {
    return PacketKey{flow.src_ip, flow.dst_ip, flow.src_port, flow.dst_port, flow.proto, 0, 0, 0, 0};
}

std::vector<PacketKey> report_keys(const IntReport& report) {
    std::vector<PacketKey> keys;
    keys.reserve(report.hops.size());
    for (std::size_t i = 0; i < report.hops.size(); ++i) {
        const auto& hop = report.hops[i];
        PacketKey key = flow_key(report.flow);
        key[static_cast<std::size_t>(Field::SwitchId)] = hop.switch_id;
        key[static_cast<std::size_t>(Field::LinkId)] = link_id(hop.switch_id, hop.egress_port);
        key[static_cast<std::size_t>(Field::QueueId)] = hop.queue_id;
        if (report.drop && report.drop->hop_index == i) {
            key[static_cast<std::size_t>(Field::DropReason)] = static_cast<FieldValue>(report.drop->reason);
        }
        keys.push_back(std::move(key));
    }
    return keys;
}

namespace {

template <class Classify>
std::optional<Match> best_over_hops(const IntReport& report, Classify&& classify) {
    std::optional<Match> best;
    for (const auto& key : report_keys(report)) {
        auto m = classify(key);
        if (m && (!best || beats(m->priority, m->rule_id, best->priority, best->rule_id))) {
            best = m;
        }
    }
    return best;
}

}  // namespace

std::optional<Match> classify_report(const ClassifierEngine& engine, const IntReport& report) {
    return best_over_hops(report, [&](const PacketKey& k) { return engine.classify(k); });
}

std::optional<Match> classify_report_linear(const RuleSet& ruleset, const IntReport& report) {
    return best_over_hops(report, [&](const PacketKey& k) { return classify_linear(ruleset, k); });
}

ProjectedReport project(const IntReport& report, const FieldSet& fields) {
    auto keep = [&](ReportField f) { return fields.test(static_cast<std::size_t>(f)); };
    ProjectedReport out{report, fields};
    IntReport& r = out.report;
    if (!keep(ReportField::Seq)) r.seq = 0;
    if (!keep(ReportField::PktSize)) r.pkt_size_bytes = 0;
    if (!keep(ReportField::Drop)) r.drop.reset();
    for (auto& hop : r.hops) {
        if (!keep(ReportField::SwitchId)) hop.switch_id = 0;
        if (!keep(ReportField::IngressPort)) hop.ingress_port = 0;
        if (!keep(ReportField::EgressPort)) hop.egress_port = 0;
        if (!keep(ReportField::QueueId)) hop.queue_id = 0;
        if (!keep(ReportField::QueueDepth)) hop.queue_depth = 0;
        if (!keep(ReportField::HopLatency)) hop.hop_latency_ns = 0;
        if (!keep(ReportField::LinkUtilization)) hop.utilization_e4 = 0;
        if (!keep(ReportField::Timestamp)) hop.timestamp_ns = 0;
    }
    return out;
}

std::vector<std::pair<MonitorId, ProjectedReport>> dispatch(const IntReport& report, const std::optional<Match>& match) {
    std::vector<std::pair<MonitorId, ProjectedReport>> out;
    if (!match || match->action == nullptr) {
        return out;
    }
    const auto projected = project(report, match->action->projection);
    for (const auto& dest : match->action->destinations) {
        out.emplace_back(dest, projected);
    }
    return out;
}

void check_destinations(const RuleSet& ruleset, const std::set<MonitorId>& known) {
    for (const auto& rule : ruleset.rules()) {
        for (const auto& dest : rule.action.destinations) {
            if (!known.contains(dest)) {
                throw ClassifierError(ClassifierError::Code::UnknownMonitor,
                                      "rule " + std::to_string(rule.rule_id) + " names unknown monitor '" + dest + "'");
            }
        }
    }
}

}  // namespace reflex::classify
