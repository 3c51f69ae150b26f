#include "reflex/classifier/engine.hpp"

#include <algorithm>
#include <numeric>

namespace reflex::classify {

ClassifierEngine::ClassifierEngine(std::shared_ptr<const RuleSet> ruleset, EngineConfig config)
    : ruleset_(std::move(ruleset)), config_(config), boxes_(*ruleset_) {
    std::vector<std::uint32_t> remaining(ruleset_->size());
    std::iota(remaining.begin(), remaining.end(), 0U);

    if (config_.use_learned_index && !remaining.empty()) {
        const auto min_size = static_cast<std::size_t>(config_.min_learned_coverage * static_cast<double>(ruleset_->size()));
        for (std::size_t set = 0; set < config_.max_learned_sets && !remaining.empty(); ++set) {
            std::size_t best_dim = 0;
            std::size_t best_cov = 0;
            for (std::size_t d = 0; d < boxes_.arity(); ++d) {
                const std::size_t cov = LearnedPartition::coverage(boxes_, d, remaining);
                if (cov > best_cov) {
                    best_cov = cov;
                    best_dim = d;
                }
            }
            if (best_cov < std::max<std::size_t>(min_size, 2)) {
                break;
            }
            auto lp = LearnedPartition::train(boxes_, best_dim, remaining, config_.learned_segment_size);
            std::vector<std::uint32_t> taken(lp.members().begin(), lp.members().end());
            std::sort(taken.begin(), taken.end());
            std::vector<std::uint32_t> rest;
            std::set_difference(remaining.begin(), remaining.end(), taken.begin(), taken.end(), std::back_inserter(rest));
            remaining = std::move(rest);
            learned_.push_back(std::move(lp));
        }
    }

    TreeConfig tc = config_.tree;
    tc.leaf_max_rules = config_.leaf_max_rules;
    tree_rules_ = remaining.size();
    tree_ = DecisionTree(boxes_, ruleset_->schema(), std::move(remaining), tc);
}

std::shared_ptr<const ClassifierEngine> ClassifierEngine::build(std::shared_ptr<const RuleSet> ruleset,
                                                                 EngineConfig config) {
    return std::shared_ptr<const ClassifierEngine>(new ClassifierEngine(std::move(ruleset), config));
}

std::optional<Match> ClassifierEngine::classify(std::span<const FieldValue> key) const {
    check_arity(ruleset_->schema(), key);
    std::uint32_t best = kNoRank;
    for (const auto& lp : learned_) {
        best = lp.lookup(boxes_, key, best);
    }
    best = tree_.lookup(boxes_, key, best);
    if (best == kNoRank) {
        return std::nullopt;
    }
    return ruleset_->match_for_rank(best);
}

EngineStats ClassifierEngine::stats() const {
    EngineStats s;
    s.rules = ruleset_->size();
    s.tree_nodes = tree_.node_count();
    s.tree_depth = tree_.depth();
    s.tree_rules = tree_rules_;
    for (const auto& lp : learned_) {
        s.learned_set_sizes.push_back(lp.size());
        s.learned_max_errors.push_back(lp.max_error());
    }
    return s;
}

}  // namespace reflex::classify
