#pragma once

#include "reflex/monitors/command.hpp"

#include <deque>
#include <map>
#include <utility>
#include <vector>

namespace reflex::monitor {

struct MicroburstConfig {
    std::uint32_t depth_threshold_pkts = 10;
    std::size_t top_k = 2;
    VirtualTime window_ns = 100'000;
    std::uint64_t throttle_rate_bits_per_s = 1'000'000'000;
};

/// Per (switch, queue) state: depth, arming, and per-flow packet counts over a
/// trailing window of hop timestamps.
struct QueueState {
    std::uint32_t last_depth = 0;
    bool armed = true;
    std::deque<std::pair<VirtualTime, FlowKey>> events;
    std::map<FlowKey, std::uint64_t> counts;
};

/// Top `k` flows by count, ties by flow order.
std::vector<std::pair<FlowKey, std::uint64_t>> top_contributors(const std::map<FlowKey, std::uint64_t>& counts,
                                                                std::size_t k);

/// Emits Throttle commands for the heaviest recent flows when a queue's depth
/// crosses above the threshold; re-arms once the depth falls back to it.
class MicroburstMonitor {
public:
    using QueueKey = std::pair<ElementId, std::uint32_t>;

    MicroburstMonitor(MonitorId id, MicroburstConfig config, std::uint64_t id_base = command_id_base(0));

    std::vector<ReflexCommand> observe(const telemetry::IntReport& report, VirtualTime now);

    const QueueState* queue(ElementId sw, std::uint32_t queue_id) const;
    std::uint64_t bursts() const noexcept { return bursts_; }
    const MonitorId& id() const noexcept { return id_; }

private:
    MonitorId id_;
    MicroburstConfig config_;
    CommandIds ids_;
    std::map<QueueKey, QueueState> queues_;
    std::uint64_t bursts_ = 0;
};

}  // namespace reflex::monitor
