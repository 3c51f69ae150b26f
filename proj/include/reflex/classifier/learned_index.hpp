#pragma once

#include "reflex/classifier/tree_engine.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace reflex::classify {

/// A set of rules that do not overlap along one field, indexed by a
/// piecewise-linear model mapping a field value to the position of the rule
/// interval containing it.
///
/// Each segment fits position ~ slope * value + intercept by least squares
/// over its intervals' endpoints, then records the worst |prediction - position|
/// over those endpoints. The prediction is monotone in the value, so the worst
/// case over an interval is attained at an endpoint, and searching
/// [prediction - error, prediction + error] always reaches the containing
/// interval. Candidates are verified against every field before they match.
class LearnedPartition {
public:
    struct Segment {
        std::uint64_t start_key = 0;  ///< lowest value routed to this segment
        std::uint32_t first = 0;      ///< interval positions [first, last)
        std::uint32_t last = 0;
        double slope = 0.0;
        double intercept = 0.0;
        std::uint32_t max_error = 0;
    };

    LearnedPartition() = default;

    /// Greedily extracts a maximum non-overlapping subset of `candidates`
    /// along `dim` (earliest-ending interval first) and trains the model.
    static LearnedPartition train(const RankedBoxes& boxes, std::size_t dim, std::span<const std::uint32_t> candidates,
                                  std::size_t segment_size = 64);

    /// Number of non-overlapping rules the greedy pass would select.
    static std::size_t coverage(const RankedBoxes& boxes, std::size_t dim, std::span<const std::uint32_t> candidates);

    std::uint32_t lookup(const RankedBoxes& boxes, std::span<const FieldValue> key, std::uint32_t bound) const noexcept;

    /// Model prediction for `value` within `seg` (exposed for tests).
    std::int64_t predict(const Segment& seg, std::uint64_t value) const noexcept;

    std::size_t dim() const noexcept { return dim_; }
    std::span<const std::uint32_t> members() const noexcept { return ranks_; }
    std::span<const Segment> segments() const noexcept { return segments_; }
    std::uint32_t max_error() const noexcept;
    std::size_t size() const noexcept { return ranks_.size(); }

private:
    std::size_t dim_ = 0;
    std::vector<std::uint64_t> lo_;
    std::vector<std::uint64_t> hi_;
    std::vector<std::uint32_t> ranks_;
    std::vector<Segment> segments_;
};

}  // namespace reflex::classify
