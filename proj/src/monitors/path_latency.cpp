#include "reflex/monitors/path_latency.hpp"

#include <algorithm>

namespace reflex::monitor {

void FlowLatencyState::push(VirtualTime latency) noexcept {
    if (size_ == kLatencyWindow) {
        sum_ -= ring_[head_];
    } else {
        ++size_;
    }
    ring_[head_] = latency;
    sum_ += latency;
    head_ = (head_ + 1) % kLatencyWindow;
}

void FlowLatencyState::reset() noexcept {
    size_ = 0;
    head_ = 0;
    sum_ = 0;
}

std::vector<VirtualTime> FlowLatencyState::samples() const {
    std::vector<VirtualTime> out;
    const std::size_t start = (head_ + kLatencyWindow - size_) % kLatencyWindow;
    for (std::size_t i = 0; i < size_; ++i) {
        out.push_back(ring_[(start + i) % kLatencyWindow]);
    }
    return out;
}

bool exceeds_average(VirtualTime latency, VirtualTime sum, std::size_t size, VirtualTime threshold) noexcept {
    __extension__ using u128 = unsigned __int128;
    const auto n = static_cast<u128>(size);
    return static_cast<u128>(latency) * n > static_cast<u128>(sum) + static_cast<u128>(threshold) * n;
}

ElementId choose_reroute_switch(const telemetry::IntReport& report, std::span<const VirtualTime> baselines) {
    std::size_t best = 0;
    std::int64_t best_excess = 0;
    for (std::size_t i = 0; i < report.hops.size() && i < baselines.size(); ++i) {
        const auto excess = static_cast<std::int64_t>(report.hops[i].hop_latency_ns) - static_cast<std::int64_t>(baselines[i]);
        if (excess > best_excess) {
            best_excess = excess;
            best = i;
        }
    }
    return best > 0 ? report.hops[best - 1].switch_id : report.hops.front().switch_id;
}

std::uint32_t TopologySnapshot::alternative_port(ElementId sw, std::uint32_t current) const {
    auto it = ports_.find(sw);
    if (it == ports_.end()) {
        return current;
    }
    std::uint32_t best = current;
    bool found = false;
    for (std::uint32_t p : it->second) {
        if (p != current && (!found || p < best)) {
            best = p;
            found = true;
        }
    }
    return best;
}

PathLatencyMonitor::PathLatencyMonitor(MonitorId id, PathLatencyConfig config, TopologySnapshot topology,
                                       std::uint64_t id_base)
    : id_(std::move(id)), config_(config), topology_(std::move(topology)), ids_(id_base) {
    if (config_.threshold_ns == 0) {
        throw MonitorError(MonitorError::Code::InvalidConfig, "path-latency threshold must be > 0");
    }
}

std::optional<ReflexCommand> PathLatencyMonitor::observe(const telemetry::IntReport& report, VirtualTime now) {
    if (report.hops.empty()) {
        return std::nullopt;
    }
    const VirtualTime latency = telemetry::path_latency(report);
    FlowLatencyState& state = flows_[report.flow];

    std::optional<ReflexCommand> cmd;
    if (state.full() && exceeds_average(latency, state.sum(), state.size(), config_.threshold_ns)) {
        std::vector<VirtualTime> base;
        base.reserve(report.hops.size());
        for (const auto& hop : report.hops) {
            auto it = baselines_.find({hop.switch_id, report.flow});
            base.push_back(it == baselines_.end() ? hop.hop_latency_ns : it->second);
        }
        const ElementId sw = choose_reroute_switch(report, base);
        std::uint32_t current = report.hops.front().egress_port;
        for (const auto& hop : report.hops) {
            if (hop.switch_id == sw) {
                current = hop.egress_port;
                break;
            }
        }
        cmd = ReflexCommand{ids_.next(), id_, now, sw,
                            Reroute{report.flow, sw, topology_.alternative_port(sw, current)}};
        state.reset();
    }
    state.push(latency);

    for (const auto& hop : report.hops) {
        auto [it, inserted] = baselines_.try_emplace({hop.switch_id, report.flow}, hop.hop_latency_ns);
        if (!inserted) {
            const auto b = static_cast<std::int64_t>(it->second);
            const auto x = static_cast<std::int64_t>(hop.hop_latency_ns);
            it->second = static_cast<VirtualTime>(b + (x - b) / 16);
        }
    }
    return cmd;
}

const FlowLatencyState* PathLatencyMonitor::flow_state(const FlowKey& flow) const {
    auto it = flows_.find(flow);
    return it == flows_.end() ? nullptr : &it->second;
}

std::optional<VirtualTime> PathLatencyMonitor::baseline(ElementId sw, const FlowKey& flow) const {
    auto it = baselines_.find({sw, flow});
    if (it == baselines_.end()) {
        return std::nullopt;
    }
    return it->second;
}

}  // namespace reflex::monitor
