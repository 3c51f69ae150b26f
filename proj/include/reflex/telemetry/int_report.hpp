#pragma once

#include "reflex/simnet/types.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reflex::telemetry {

using sim::VirtualTime;

struct FlowKey {
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t proto = 0;

    auto operator<=>(const FlowKey&) const = default;

    /// `<sip>:<sport>-<dip>:<dport>/<proto>` with dotted-quad addresses.
    std::string to_string() const;
};

std::string format_ipv4(std::uint32_t ip);

/// Link utilization is carried as fixed point with four decimals (1.0 == 10000).
inline constexpr std::uint32_t kUtilizationScale = 10000;

struct HopMetadata {
    std::uint32_t switch_id = 0;
    std::uint32_t ingress_port = 0;
    std::uint32_t egress_port = 0;
    std::uint32_t queue_id = 0;
    std::uint32_t queue_depth = 0;  ///< packets
    VirtualTime hop_latency_ns = 0;
    std::uint32_t utilization_e4 = 0;
    VirtualTime timestamp_ns = 0;

    double link_utilization() const noexcept { return utilization_e4 / static_cast<double>(kUtilizationScale); }

    auto operator<=>(const HopMetadata&) const = default;
};

enum class DropReason : std::uint8_t { QueueOverflow = 1, AclDeny = 2, TtlExpired = 3, Other = 4 };

std::string_view to_string(DropReason reason);
std::optional<DropReason> parse_drop_reason(std::string_view name);

struct DropInfo {
    std::uint32_t hop_index = 0;
    DropReason reason = DropReason::Other;

    bool operator==(const DropInfo&) const = default;
};

struct IntReport {
    FlowKey flow;
    std::uint64_t seq = 0;
    std::vector<HopMetadata> hops;  ///< path order
    std::uint32_t pkt_size_bytes = 0;
    std::optional<DropInfo> drop;

    bool operator==(const IntReport&) const = default;
};

class TelemetryError : public std::runtime_error {
public:
    enum class Code { EmptyPath, MalformedHop, InvalidDrop, ZeroPacketSize, Parse };

    TelemetryError(Code code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), code_(code), line_(line) {}

    Code code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    Code code_;
    std::size_t line_;
};

/// Checks the report invariants; throws TelemetryError.
void validate(const IntReport& report);

/// A data packet as it arrives at the INT sink. Switches push metadata onto
/// the stack, so the most recent hop comes first.
struct IntPacket {
    FlowKey flow;
    std::uint64_t seq = 0;
    std::uint32_t size_bytes = 0;
    std::vector<HopMetadata> int_stack;
};

/// What the sink hands to the destination host after stripping INT.
struct PayloadDescriptor {
    FlowKey flow;
    std::uint32_t size_bytes = 0;

    bool operator==(const PayloadDescriptor&) const = default;
};

std::pair<PayloadDescriptor, IntReport> sink_extract(const IntPacket& packet);

VirtualTime path_latency(const IntReport& report) noexcept;

IntReport make_drop_report(const FlowKey& flow, std::vector<HopMetadata> hops_so_far, DropReason reason,
                           std::uint64_t seq = 0, std::uint32_t pkt_size_bytes = 0);

/// Reports per second generated by a fully loaded link of `pkt_size_bytes` packets.
std::uint64_t report_rate_for_link(std::uint64_t line_rate_bits_per_s, std::uint32_t pkt_size_bytes);

}  // namespace reflex::telemetry
