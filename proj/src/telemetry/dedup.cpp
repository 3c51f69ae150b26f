#include "reflex/telemetry/dedup.hpp"

#include <algorithm>
#include <stdexcept>

namespace reflex::telemetry {

Deduplicator::Deduplicator(std::size_t window) : window_(window) {
    if (window_ == 0) {
        throw std::invalid_argument("dedup window must be >= 1");
    }
}

void coalesce_into(IntReport& into, const IntReport& incoming) {
    std::optional<HopMetadata> drop_hop;
    if (into.drop) {
        drop_hop = into.hops[into.drop->hop_index];
    } else if (incoming.drop) {
        drop_hop = incoming.hops[incoming.drop->hop_index];
    }
    std::vector<HopMetadata> merged = into.hops;
    merged.insert(merged.end(), incoming.hops.begin(), incoming.hops.end());
    std::sort(merged.begin(), merged.end(), [](const HopMetadata& a, const HopMetadata& b) {
        return a.timestamp_ns != b.timestamp_ns ? a.timestamp_ns < b.timestamp_ns : a < b;
    });
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    into.hops = std::move(merged);
    into.pkt_size_bytes = std::max(into.pkt_size_bytes, incoming.pkt_size_bytes);
    if (drop_hop) {
        const auto reason = into.drop ? into.drop->reason : incoming.drop->reason;
        const auto it = std::find(into.hops.begin(), into.hops.end(), *drop_hop);
        into.drop = DropInfo{static_cast<std::uint32_t>(it - into.hops.begin()), reason};
    }
}

std::vector<IntReport> Deduplicator::push(IntReport report) {
    ++stats_.reports_in;
    std::vector<IntReport> out;
    Key key{report.flow, report.seq};
    if (auto it = held_.find(key); it != held_.end()) {
        if (it->second == report) {
            ++stats_.duplicates_removed;
        } else {
            coalesce_into(it->second, report);
            ++stats_.coalesced;
        }
        return out;
    }
    if (order_.size() == window_) {
        auto node = held_.extract(order_.front());
        order_.pop_front();
        out.push_back(std::move(node.mapped()));
        ++stats_.reports_out;
    }
    order_.push_back(key);
    held_.emplace(std::move(key), std::move(report));
    return out;
}

std::vector<IntReport> Deduplicator::flush() {
    std::vector<IntReport> out;
    out.reserve(order_.size());
    for (const auto& key : order_) {
        out.push_back(std::move(held_.at(key)));
    }
    stats_.reports_out += out.size();
    order_.clear();
    held_.clear();
    return out;
}

DedupResult dedup_coalesce(std::span<const IntReport> stream, std::size_t window) {
    Deduplicator dedup(window);
    DedupResult result;
    for (const auto& report : stream) {
        for (auto& r : dedup.push(report)) {
            result.reports.push_back(std::move(r));
        }
    }
    for (auto& r : dedup.flush()) {
        result.reports.push_back(std::move(r));
    }
    result.stats = dedup.stats();
    return result;
}

}  // namespace reflex::telemetry
