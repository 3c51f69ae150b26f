#pragma once

#include "reflex/monitors/command.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace reflex::monitor {

inline constexpr std::size_t kLatencyWindow = 10;

/// Circular buffer of the last kLatencyWindow path latencies of one flow.
class FlowLatencyState {
public:
    void push(VirtualTime latency) noexcept;
    void reset() noexcept;

    bool full() const noexcept { return size_ == kLatencyWindow; }
    std::size_t size() const noexcept { return size_; }
    VirtualTime sum() const noexcept { return sum_; }
    /// Samples oldest first.
    std::vector<VirtualTime> samples() const;

private:
    std::array<VirtualTime, kLatencyWindow> ring_{};
    std::size_t head_ = 0;  ///< next slot to overwrite
    std::size_t size_ = 0;
    VirtualTime sum_ = 0;
};

/// Exact form of `latency > sum / size + threshold` without division.
bool exceeds_average(VirtualTime latency, VirtualTime sum, std::size_t size, VirtualTime threshold) noexcept;

/// Switch to reprogram: the one just upstream of the hop with the largest
/// positive excess over its baseline, or the first switch when that hop is the
/// first one or nothing exceeds its baseline.
ElementId choose_reroute_switch(const telemetry::IntReport& report, std::span<const VirtualTime> baselines);

/// Read-only view of switch ports, distributed to monitors at build time.
class TopologySnapshot {
public:
    void add_port(ElementId sw, std::uint32_t port) { ports_[sw].push_back(port); }
    /// Smallest port at `sw` other than `current`, or `current` if none.
    std::uint32_t alternative_port(ElementId sw, std::uint32_t current) const;

private:
    std::map<ElementId, std::vector<std::uint32_t>> ports_;
};

struct PathLatencyConfig {
    VirtualTime threshold_ns = 500;
};

/// Flags a flow whose path latency jumps above the moving average of its
/// previous ten reports by more than the threshold, and asks for a reroute.
class PathLatencyMonitor {
public:
    PathLatencyMonitor(MonitorId id, PathLatencyConfig config, TopologySnapshot topology = {},
                       std::uint64_t id_base = command_id_base(0));

    std::optional<ReflexCommand> observe(const telemetry::IntReport& report, VirtualTime now);

    const FlowLatencyState* flow_state(const FlowKey& flow) const;
    /// EWMA hop-latency baseline, if the (switch, flow) pair has been seen.
    std::optional<VirtualTime> baseline(ElementId sw, const FlowKey& flow) const;
    std::size_t flows() const noexcept { return flows_.size(); }
    const MonitorId& id() const noexcept { return id_; }

private:
    MonitorId id_;
    PathLatencyConfig config_;
    TopologySnapshot topology_;
    CommandIds ids_;
    std::map<FlowKey, FlowLatencyState> flows_;
    std::map<std::pair<ElementId, FlowKey>, VirtualTime> baselines_;
};

}  // namespace reflex::monitor
