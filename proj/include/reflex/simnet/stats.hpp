#pragma once

#include "reflex/simnet/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace reflex::sim {

/// Percentile summary over an exact sample set.
struct LatencyStats {
    std::uint64_t count = 0;
    std::uint64_t drop_count = 0;
    double mean_ns = 0.0;
    VirtualTime p50_ns = 0;
    VirtualTime p99_ns = 0;
    VirtualTime max_ns = 0;
};

/// Nearest-rank percentile: the smallest sample such that at least pct% of
/// samples are <= it. `sorted` must be ascending and non-empty.
VirtualTime nearest_rank(std::span<const VirtualTime> sorted, unsigned pct);

LatencyStats summarize(std::span<const VirtualTime> samples, std::uint64_t drops = 0);

/// Labelled latency samples collected during a run.
class StatsSink {
public:
    /// Appends end - start under `label`. Throws std::invalid_argument if end < start.
    void record_latency(const std::string& label, VirtualTime start, VirtualTime end);
    void record_sample(const std::string& label, VirtualTime value);
    void record_drop(const std::string& label, std::uint64_t n = 1);

    LatencyStats summary(const std::string& label) const;
    std::span<const VirtualTime> samples(const std::string& label) const;
    std::vector<std::string> labels() const;

private:
    std::map<std::string, std::vector<VirtualTime>> samples_;
    std::map<std::string, std::uint64_t> drops_;
};

}  // namespace reflex::sim
