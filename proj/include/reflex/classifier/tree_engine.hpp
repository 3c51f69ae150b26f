#pragma once

#include "reflex/classifier/ruleset.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace reflex::classify {

inline constexpr std::uint32_t kNoRank = std::numeric_limits<std::uint32_t>::max();

struct TreeConfig {
    std::size_t leaf_max_rules = 16;
    std::size_t max_depth = 24;
    std::size_t max_cuts = 32;
    /// HiCuts space factor: a cut is accepted while the replicated rule
    /// count stays within space_factor * rules at the node.
    double space_factor = 4.0;
    /// Hard cap on tree nodes; past it every pending node becomes a leaf.
    std::size_t node_budget = 4'000'000;
};

/// Flat per-rule boxes indexed by rank (best rule first).
class RankedBoxes {
public:
    explicit RankedBoxes(const RuleSet& ruleset);

    std::size_t arity() const noexcept { return arity_; }
    FieldValue lo(std::uint32_t rank, std::size_t dim) const noexcept { return lo_[rank * arity_ + dim]; }
    FieldValue hi(std::uint32_t rank, std::size_t dim) const noexcept { return hi_[rank * arity_ + dim]; }
    bool matches(std::uint32_t rank, std::span<const FieldValue> key) const noexcept;

private:
    std::size_t arity_;
    std::vector<FieldValue> lo_;
    std::vector<FieldValue> hi_;
};

/// Multi-dimensional cutting tree. Each internal node cuts its box into
/// equal slices along one field; rules spanning the whole box in that field
/// are pushed into a side tree at the node instead of being copied into
/// every slice. Leaves hold rule ranks in ascending order.
class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(const RankedBoxes& boxes, const Schema& schema, std::vector<std::uint32_t> ranks, TreeConfig config);

    /// Best matching rank strictly better than `bound`, or `bound`.
    std::uint32_t lookup(const RankedBoxes& boxes, std::span<const FieldValue> key, std::uint32_t bound) const noexcept;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t stored_rules() const noexcept { return leaf_rules_.size(); }
    std::size_t depth() const noexcept { return depth_; }

private:
    struct Node {
        bool leaf = true;
        std::uint8_t dim = 0;
        std::uint32_t cuts = 0;
        std::uint64_t box_lo = 0;
        std::uint64_t cut_width = 1;
        std::uint32_t first_child = 0;
        std::uint32_t pushed = kNoRank;  ///< root of the side tree, if any
        std::uint32_t rules_begin = 0;
        std::uint32_t rules_end = 0;
    };
    struct Interval {
        std::uint64_t lo;
        std::uint64_t hi;
    };

    std::uint32_t build(const RankedBoxes& boxes, std::vector<Interval> box, std::vector<std::uint32_t> ranks,
                        std::vector<bool> allowed, std::size_t depth);
    std::uint32_t make_leaf(const std::vector<std::uint32_t>& ranks);
    std::uint32_t lookup_from(std::uint32_t node, const RankedBoxes& boxes, std::span<const FieldValue> key,
                              std::uint32_t bound) const noexcept;

    TreeConfig config_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> leaf_rules_;
    std::uint32_t root_ = kNoRank;
    std::size_t depth_ = 0;
};

}  // namespace reflex::classify
