#include "reflex/simnet/stats.hpp"

#include <algorithm>
#include <stdexcept>

namespace reflex::sim {

VirtualTime nearest_rank(std::span<const VirtualTime> sorted, unsigned pct) {
    if (sorted.empty()) {
        throw std::invalid_argument("nearest_rank: empty sample set");
    }
    const std::uint64_t n = sorted.size();
    std::uint64_t rank = (n * pct + 99) / 100;
    rank = std::clamp<std::uint64_t>(rank, 1, n);
    return sorted[rank - 1];
}

LatencyStats summarize(std::span<const VirtualTime> samples, std::uint64_t drops) {
    LatencyStats s;
    s.drop_count = drops;
    s.count = samples.size();
    if (samples.empty()) {
        return s;
    }
    std::vector<VirtualTime> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    // Exact integer sum; 2^64 ns is ~584 years of accumulated latency.
    std::uint64_t total = 0;
    for (VirtualTime v : sorted) {
        total += v;
    }
    s.mean_ns = static_cast<double>(total) / static_cast<double>(sorted.size());
    s.p50_ns = nearest_rank(sorted, 50);
    s.p99_ns = nearest_rank(sorted, 99);
    s.max_ns = sorted.back();
    return s;
}

void StatsSink::record_latency(const std::string& label, VirtualTime start, VirtualTime end) {
    if (end < start) {
        throw std::invalid_argument("record_latency: end precedes start for '" + label + "'");
    }
    samples_[label].push_back(end - start);
}

void StatsSink::record_sample(const std::string& label, VirtualTime value) {
    samples_[label].push_back(value);
}

void StatsSink::record_drop(const std::string& label, std::uint64_t n) {
    drops_[label] += n;
}

LatencyStats StatsSink::summary(const std::string& label) const {
    std::uint64_t drops = 0;
    if (auto it = drops_.find(label); it != drops_.end()) {
        drops = it->second;
    }
    return summarize(samples(label), drops);
}

std::span<const VirtualTime> StatsSink::samples(const std::string& label) const {
    if (auto it = samples_.find(label); it != samples_.end()) {
        return it->second;
    }
    return {};
}

std::vector<std::string> StatsSink::labels() const {
    std::vector<std::string> out;
    for (const auto& [label, _] : samples_) {
        out.push_back(label);
    }
    for (const auto& [label, _] : drops_) {
        if (!samples_.contains(label)) {
            out.push_back(label);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace reflex::sim
