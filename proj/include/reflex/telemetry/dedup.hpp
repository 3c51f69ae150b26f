#pragma once

#include "reflex/telemetry/int_report.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace reflex::telemetry {

struct ReportStreamStats {
    std::uint64_t reports_in = 0;
    std::uint64_t duplicates_removed = 0;
    std::uint64_t coalesced = 0;
    std::uint64_t reports_out = 0;

    bool operator==(const ReportStreamStats&) const = default;
};

inline constexpr std::size_t kDefaultDedupWindow = 1024;

/// Streaming duplicate filter keyed by (flow, seq). The window holds the most
/// recent `window` distinct keys in first-arrival order; a report is released
/// once its key leaves the window (or on flush), so output preserves
/// first-arrival order. Exact repeats are removed; repeats with different
/// hop sets are merged by hop-set union ordered by timestamp.
class Deduplicator {
public:
    explicit Deduplicator(std::size_t window = kDefaultDedupWindow);

    /// Returns reports evicted from the window by this arrival.
    std::vector<IntReport> push(IntReport report);
    std::vector<IntReport> flush();

    const ReportStreamStats& stats() const noexcept { return stats_; }
    std::size_t pending() const noexcept { return order_.size(); }

private:
    using Key = std::pair<FlowKey, std::uint64_t>;

    std::size_t window_;
    std::deque<Key> order_;
    std::map<Key, IntReport> held_;
    ReportStreamStats stats_;
};

/// Merges `incoming` into `into` (same flow and seq).
void coalesce_into(IntReport& into, const IntReport& incoming);

struct DedupResult {
    std::vector<IntReport> reports;
    ReportStreamStats stats;
};

DedupResult dedup_coalesce(std::span<const IntReport> stream, std::size_t window = kDefaultDedupWindow);

}  // namespace reflex::telemetry
