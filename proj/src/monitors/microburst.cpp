#include "reflex/monitors/microburst.hpp"

#include <algorithm>

namespace reflex::monitor {

std::vector<std::pair<FlowKey, std::uint64_t>> top_contributors(const std::map<FlowKey, std::uint64_t>& counts,
                                                                std::size_t k) {
    std::vector<std::pair<FlowKey, std::uint64_t>> all(counts.begin(), counts.end());
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

MicroburstMonitor::MicroburstMonitor(MonitorId id, MicroburstConfig config, std::uint64_t id_base)
    : id_(std::move(id)), config_(config), ids_(id_base) {
    if (config_.depth_threshold_pkts == 0 || config_.top_k == 0) {
        throw MonitorError(MonitorError::Code::InvalidConfig, "microburst threshold and top_k must be > 0");
    }
}

std::vector<ReflexCommand> MicroburstMonitor::observe(const telemetry::IntReport& report, VirtualTime now) {
    std::vector<ReflexCommand> out;
    for (const auto& hop : report.hops) {
        QueueState& q = queues_[{hop.switch_id, hop.queue_id}];
        q.events.emplace_back(hop.timestamp_ns, report.flow);
        ++q.counts[report.flow];
        const VirtualTime horizon = hop.timestamp_ns > config_.window_ns ? hop.timestamp_ns - config_.window_ns : 0;
        while (!q.events.empty() && q.events.front().first < horizon) {
            auto it = q.counts.find(q.events.front().second);
            if (--it->second == 0) {
                q.counts.erase(it);
            }
            q.events.pop_front();
        }
        q.last_depth = hop.queue_depth;
        if (hop.queue_depth > config_.depth_threshold_pkts) {
            if (q.armed) {
                q.armed = false;
                ++bursts_;
                for (const auto& [flow, count] : top_contributors(q.counts, config_.top_k)) {
                    (void)count;
                    out.push_back(ReflexCommand{ids_.next(), id_, now, hop.switch_id,
                                                Throttle{flow, config_.throttle_rate_bits_per_s}});
                }
            }
        } else {
            q.armed = true;
        }
    }
    return out;
}

const QueueState* MicroburstMonitor::queue(ElementId sw, std::uint32_t queue_id) const {
    auto it = queues_.find({sw, queue_id});
    return it == queues_.end() ? nullptr : &it->second;
}

}  // namespace reflex::monitor
