#include "reflex/classifier/tree_engine.hpp"

#include <algorithm>

namespace reflex::classify {

RankedBoxes::RankedBoxes(const RuleSet& ruleset) : arity_(ruleset.schema().size()) {
    lo_.resize(ruleset.size() * arity_);
    hi_.resize(ruleset.size() * arity_);
    for (std::uint32_t rank = 0; rank < ruleset.size(); ++rank) {
        const Rule& rule = ruleset.ranked(rank);
        for (std::size_t d = 0; d < arity_; ++d) {
            lo_[rank * arity_ + d] = rule.matchers[d].lo();
            hi_[rank * arity_ + d] = rule.matchers[d].hi();
        }
    }
}

bool RankedBoxes::matches(std::uint32_t rank, std::span<const FieldValue> key) const noexcept {
    const FieldValue* lo = &lo_[rank * arity_];
    const FieldValue* hi = &hi_[rank * arity_];
    for (std::size_t d = 0; d < arity_; ++d) {
        if (key[d] < lo[d] || key[d] > hi[d]) {
            return false;
        }
    }
    return true;
}

DecisionTree::DecisionTree(const RankedBoxes& boxes, const Schema& schema, std::vector<std::uint32_t> ranks,
                           TreeConfig config)
    : config_(config) {
    std::sort(ranks.begin(), ranks.end());
    std::vector<Interval> box;
    for (const auto& field : schema) {
        box.push_back(Interval{0, field.max_value()});
    }
    root_ = build(boxes, std::move(box), std::move(ranks), std::vector<bool>(schema.size(), true), 0);
}

std::uint32_t DecisionTree::make_leaf(const std::vector<std::uint32_t>& ranks) {
    Node node;
    node.leaf = true;
    node.rules_begin = static_cast<std::uint32_t>(leaf_rules_.size());
    leaf_rules_.insert(leaf_rules_.end(), ranks.begin(), ranks.end());
    node.rules_end = static_cast<std::uint32_t>(leaf_rules_.size());
    nodes_.push_back(node);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::uint32_t DecisionTree::build(const RankedBoxes& boxes, std::vector<Interval> box, std::vector<std::uint32_t> ranks,
                                  std::vector<bool> allowed, std::size_t depth) {
    depth_ = std::max(depth_, depth);
    if (ranks.size() <= config_.leaf_max_rules || depth >= config_.max_depth || nodes_.size() >= config_.node_budget) {
        return make_leaf(ranks);
    }

    // Cut along the field whose rule boundaries are most diverse inside the box.
    int best_dim = -1;
    std::size_t best_score = 0;
    std::vector<std::uint64_t> cuts_seen;
    for (std::size_t d = 0; d < box.size(); ++d) {
        if (!allowed[d] || box[d].lo == box[d].hi) {
            continue;
        }
        cuts_seen.clear();
        for (std::uint32_t r : ranks) {
            const std::uint64_t lo = std::max<std::uint64_t>(boxes.lo(r, d), box[d].lo);
            const std::uint64_t hi = std::min<std::uint64_t>(boxes.hi(r, d), box[d].hi);
            if (lo > box[d].lo) {
                cuts_seen.push_back(lo);
            }
            if (hi < box[d].hi) {
                cuts_seen.push_back(hi + 1);
            }
        }
        std::sort(cuts_seen.begin(), cuts_seen.end());
        const auto score = static_cast<std::size_t>(std::unique(cuts_seen.begin(), cuts_seen.end()) - cuts_seen.begin());
        if (score > best_score) {
            best_score = score;
            best_dim = static_cast<int>(d);
        }
    }
    if (best_dim < 0) {
        return make_leaf(ranks);
    }
    const auto d = static_cast<std::size_t>(best_dim);
    const Interval span = box[d];

    std::vector<std::uint32_t> wide;
    std::vector<std::uint32_t> narrow;
    for (std::uint32_t r : ranks) {
        if (boxes.lo(r, d) <= span.lo && boxes.hi(r, d) >= span.hi) {
            wide.push_back(r);
        } else {
            narrow.push_back(r);
        }
    }

    const std::uint64_t width = span.hi - span.lo + 1;
    auto child_span = [&](std::uint32_t r, std::uint64_t cut_width) {
        const std::uint64_t lo = std::max<std::uint64_t>(boxes.lo(r, d), span.lo) - span.lo;
        const std::uint64_t hi = std::min<std::uint64_t>(boxes.hi(r, d), span.hi) - span.lo;
        return std::pair{lo / cut_width, hi / cut_width};
    };
    std::uint64_t cuts = 2;
    while (cuts * 2 <= config_.max_cuts && cuts * 2 <= width) {
        const std::uint64_t next = cuts * 2;
        const std::uint64_t w = (width + next - 1) / next;
        std::uint64_t cost = next;
        for (std::uint32_t r : narrow) {
            auto [a, b] = child_span(r, w);
            cost += b - a + 1;
        }
        if (static_cast<double>(cost) > config_.space_factor * static_cast<double>(narrow.size())) {
            break;
        }
        cuts = next;
    }
    const std::uint64_t cut_width = (width + cuts - 1) / cuts;
    const std::uint64_t child_count = (width + cut_width - 1) / cut_width;

    std::vector<std::vector<std::uint32_t>> child_rules(child_count);
    for (std::uint32_t r : narrow) {
        auto [a, b] = child_span(r, cut_width);
        for (std::uint64_t c = a; c <= b; ++c) {
            child_rules[c].push_back(r);
        }
    }
    const bool progress = !wide.empty() || std::any_of(child_rules.begin(), child_rules.end(), [&](const auto& c) {
        return c.size() < narrow.size();
    });
    if (!progress) {
        return make_leaf(ranks);
    }

    nodes_.push_back(Node{});
    const auto self = static_cast<std::uint32_t>(nodes_.size() - 1);
    std::uint32_t pushed = kNoRank;
    if (!wide.empty()) {
        auto side_allowed = allowed;
        side_allowed[d] = false;
        pushed = build(boxes, box, std::move(wide), std::move(side_allowed), depth + 1);
    }
    std::vector<std::uint32_t> children(child_count);
    for (std::uint64_t c = 0; c < child_count; ++c) {
        auto child_box = box;
        child_box[d].lo = span.lo + c * cut_width;
        child_box[d].hi = std::min(span.hi, child_box[d].lo + cut_width - 1);
        children[c] = build(boxes, std::move(child_box), std::move(child_rules[c]), allowed, depth + 1);
    }
    Node& node = nodes_[self];
    node.leaf = false;
    node.dim = static_cast<std::uint8_t>(d);
    node.cuts = static_cast<std::uint32_t>(child_count);
    node.box_lo = span.lo;
    node.cut_width = cut_width;
    node.pushed = pushed;
    // Children indices are stored in the leaf pool to keep one flat allocation.
    node.first_child = static_cast<std::uint32_t>(leaf_rules_.size());
    leaf_rules_.insert(leaf_rules_.end(), children.begin(), children.end());
    return self;
}

std::uint32_t DecisionTree::lookup_from(std::uint32_t index, const RankedBoxes& boxes, std::span<const FieldValue> key,
                                        std::uint32_t bound) const noexcept {
    for (;;) {
        const Node& node = nodes_[index];
        if (node.pushed != kNoRank) {
            bound = lookup_from(node.pushed, boxes, key, bound);
        }
        if (node.leaf) {
            for (std::uint32_t i = node.rules_begin; i < node.rules_end; ++i) {
                const std::uint32_t rank = leaf_rules_[i];
                if (rank >= bound) {
                    break;
                }
                if (boxes.matches(rank, key)) {
                    return rank;
                }
            }
            return bound;
        }
        const std::uint64_t slot = (std::uint64_t{key[node.dim]} - node.box_lo) / node.cut_width;
        index = leaf_rules_[node.first_child + slot];
    }
}

std::uint32_t DecisionTree::lookup(const RankedBoxes& boxes, std::span<const FieldValue> key,
                                   std::uint32_t bound) const noexcept {
    if (root_ == kNoRank) {
        return bound;
    }
    return lookup_from(root_, boxes, key, bound);
}

}  // namespace reflex::classify
