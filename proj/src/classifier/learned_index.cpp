#include "reflex/classifier/learned_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reflex::classify {

namespace {

std::vector<std::uint32_t> greedy_disjoint(const RankedBoxes& boxes, std::size_t dim,
                                           std::span<const std::uint32_t> candidates) {
    std::vector<std::uint32_t> order(candidates.begin(), candidates.end());
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto ha = boxes.hi(a, dim);
        const auto hb = boxes.hi(b, dim);
        if (ha != hb) {
            return ha < hb;
        }
        // Narrower first, then the better-ranked rule.
        const auto la = boxes.lo(a, dim);
        const auto lb = boxes.lo(b, dim);
        return la != lb ? la > lb : a < b;
    });
    std::vector<std::uint32_t> picked;
    bool any = false;
    std::uint64_t last_hi = 0;
    for (std::uint32_t r : order) {
        if (!any || boxes.lo(r, dim) > last_hi) {
            picked.push_back(r);
            last_hi = boxes.hi(r, dim);
            any = true;
        }
    }
    return picked;
}

}  // namespace

std::size_t LearnedPartition::coverage(const RankedBoxes& boxes, std::size_t dim,
                                       std::span<const std::uint32_t> candidates) {
    return greedy_disjoint(boxes, dim, candidates).size();
}

LearnedPartition LearnedPartition::train(const RankedBoxes& boxes, std::size_t dim,
                                         std::span<const std::uint32_t> candidates, std::size_t segment_size) {
    LearnedPartition lp;
    lp.dim_ = dim;
    lp.ranks_ = greedy_disjoint(boxes, dim, candidates);  // already sorted by interval
    for (std::uint32_t r : lp.ranks_) {
        lp.lo_.push_back(boxes.lo(r, dim));
        lp.hi_.push_back(boxes.hi(r, dim));
    }
    const std::size_t n = lp.ranks_.size();
    segment_size = std::max<std::size_t>(segment_size, 1);
    for (std::size_t first = 0; first < n; first += segment_size) {
        const std::size_t last = std::min(n, first + segment_size);
        Segment seg;
        seg.first = static_cast<std::uint32_t>(first);
        seg.last = static_cast<std::uint32_t>(last);
        seg.start_key = first == 0 ? 0 : lp.lo_[first];

        // Least squares on (value - start_key, position) over both endpoints.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        double count = 0;
        for (std::size_t i = first; i < last; ++i) {
            for (std::uint64_t v : {lp.lo_[i], lp.hi_[i]}) {
                const double x = static_cast<double>(v - seg.start_key);
                const double y = static_cast<double>(i);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                count += 1;
            }
        }
        const double denom = count * sxx - sx * sx;
        seg.slope = denom > 0 ? (count * sxy - sx * sy) / denom : 0.0;
        if (seg.slope < 0) {
            seg.slope = 0;
        }
        seg.intercept = (sy - seg.slope * sx) / count;
        lp.segments_.push_back(seg);

        // Verify the bound with the exact arithmetic used at lookup time.
        Segment& s = lp.segments_.back();
        std::uint32_t err = 0;
        for (std::size_t i = first; i < last; ++i) {
            for (std::uint64_t v : {lp.lo_[i], lp.hi_[i]}) {
                const std::int64_t p = lp.predict(s, v);
                const auto e = static_cast<std::uint64_t>(std::llabs(p - static_cast<std::int64_t>(i)));
                err = std::max<std::uint32_t>(err, static_cast<std::uint32_t>(std::min<std::uint64_t>(e, UINT32_MAX)));
            }
        }
        s.max_error = err;
    }
    return lp;
}

std::int64_t LearnedPartition::predict(const Segment& seg, std::uint64_t value) const noexcept {
    const double x = static_cast<double>(value - seg.start_key);
    return static_cast<std::int64_t>(std::floor(seg.slope * x + seg.intercept));
}

std::uint32_t LearnedPartition::max_error() const noexcept {
    std::uint32_t e = 0;
    for (const auto& s : segments_) {
        e = std::max(e, s.max_error);
    }
    return e;
}

std::uint32_t LearnedPartition::lookup(const RankedBoxes& boxes, std::span<const FieldValue> key,
                                       std::uint32_t bound) const noexcept {
    if (segments_.empty()) {
        return bound;
    }
    const std::uint64_t v = key[dim_];
    auto seg_it = std::upper_bound(segments_.begin(), segments_.end(), v,
                                   [](std::uint64_t value, const Segment& s) { return value < s.start_key; });
    const Segment& seg = *std::prev(seg_it);
    const std::int64_t p = predict(seg, v);
    const std::int64_t from = std::max<std::int64_t>(seg.first, p - seg.max_error);
    const std::int64_t to = std::min<std::int64_t>(seg.last, p + seg.max_error + 1);
    if (from >= to) {
        return bound;
    }
    // Last interval in the window starting at or before v.
    auto begin = lo_.begin() + from;
    auto end = lo_.begin() + to;
    auto it = std::upper_bound(begin, end, v);
    if (it == begin) {
        return bound;
    }
    const auto pos = static_cast<std::size_t>(std::prev(it) - lo_.begin());
    if (hi_[pos] < v) {
        return bound;
    }
    const std::uint32_t rank = ranks_[pos];
    if (rank < bound && boxes.matches(rank, key)) {
        return rank;
    }
    return bound;
}

}  // namespace reflex::classify
