#include "reflex/telemetry/int_report.hpp"

#include <algorithm>
#include <array>

namespace reflex::telemetry {

std::string format_ipv4(std::uint32_t ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." + std::to_string((ip >> 8) & 0xff) +
           "." + std::to_string(ip & 0xff);
}

std::string FlowKey::to_string() const {
    return format_ipv4(src_ip) + ":" + std::to_string(src_port) + "-" + format_ipv4(dst_ip) + ":" +
           std::to_string(dst_port) + "/" + std::to_string(proto);
}

namespace {
constexpr std::array<std::pair<DropReason, std::string_view>, 4> kReasonNames{{
    {DropReason::QueueOverflow, "QueueOverflow"},
    {DropReason::AclDeny, "AclDeny"},
    {DropReason::TtlExpired, "TtlExpired"},
    {DropReason::Other, "Other"},
}};
}  // namespace

std::string_view to_string(DropReason reason) {
    for (const auto& [r, name] : kReasonNames) {
        if (r == reason) {
            return name;
        }
    }
    return "Other";
}

std::optional<DropReason> parse_drop_reason(std::string_view name) {
    for (const auto& [r, n] : kReasonNames) {
        if (n == name) {
            return r;
        }
    }
    return std::nullopt;
}

void validate(const IntReport& report) {
    if (report.hops.empty()) {
        throw TelemetryError(TelemetryError::Code::EmptyPath, "report for " + report.flow.to_string() + " has no hops");
    }
    for (std::size_t i = 0; i < report.hops.size(); ++i) {
        const auto& hop = report.hops[i];
        if (hop.utilization_e4 > kUtilizationScale) {
            throw TelemetryError(TelemetryError::Code::MalformedHop,
                                 "hop " + std::to_string(i) + " link utilization exceeds 1.0");
        }
        if (i > 0 && hop.timestamp_ns < report.hops[i - 1].timestamp_ns) {
            throw TelemetryError(TelemetryError::Code::MalformedHop,
                                 "hop " + std::to_string(i) + " timestamp precedes the previous hop");
        }
    }
    if (report.drop && report.drop->hop_index >= report.hops.size()) {
        throw TelemetryError(TelemetryError::Code::InvalidDrop, "drop hop index out of range");
    }
}

std::pair<PayloadDescriptor, IntReport> sink_extract(const IntPacket& packet) {
    if (packet.int_stack.empty()) {
        throw TelemetryError(TelemetryError::Code::EmptyPath, "packet carries no INT hop records");
    }
    IntReport report;
    report.flow = packet.flow;
    report.seq = packet.seq;
    report.pkt_size_bytes = packet.size_bytes;
    report.hops.assign(packet.int_stack.rbegin(), packet.int_stack.rend());
    validate(report);
    return {PayloadDescriptor{packet.flow, packet.size_bytes}, std::move(report)};
}

VirtualTime path_latency(const IntReport& report) noexcept {
    VirtualTime total = 0;
    for (const auto& hop : report.hops) {
        total += hop.hop_latency_ns;
    }
    return total;
}

IntReport make_drop_report(const FlowKey& flow, std::vector<HopMetadata> hops_so_far, DropReason reason,
                           std::uint64_t seq, std::uint32_t pkt_size_bytes) {
    if (hops_so_far.empty()) {
        throw TelemetryError(TelemetryError::Code::EmptyPath, "drop report needs at least one hop");
    }
    IntReport report;
    report.flow = flow;
    report.seq = seq;
    report.pkt_size_bytes = pkt_size_bytes;
    report.drop = DropInfo{static_cast<std::uint32_t>(hops_so_far.size() - 1), reason};
    report.hops = std::move(hops_so_far);
    return report;
}

std::uint64_t report_rate_for_link(std::uint64_t line_rate_bits_per_s, std::uint32_t pkt_size_bytes) {
    if (pkt_size_bytes == 0) {
        throw TelemetryError(TelemetryError::Code::ZeroPacketSize, "packet size must be > 0");
    }
    if (line_rate_bits_per_s == 0) {
        throw TelemetryError(TelemetryError::Code::ZeroPacketSize, "line rate must be > 0");
    }
    return line_rate_bits_per_s / (static_cast<std::uint64_t>(pkt_size_bytes) * 8);
}

}  // namespace reflex::telemetry
