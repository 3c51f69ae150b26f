#pragma once

#include "reflex/classifier/learned_index.hpp"
#include "reflex/classifier/ruleset.hpp"
#include "reflex/classifier/tree_engine.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace reflex::classify {

struct EngineConfig {
    /// SIZE_MAX turns the tree into a single leaf, i.e. a linear scan.
    std::size_t leaf_max_rules = 16;
    bool use_learned_index = false;
    std::size_t max_learned_sets = 2;
    /// A learned set is kept only if it absorbs at least this fraction of the rules.
    double min_learned_coverage = 0.05;
    std::size_t learned_segment_size = 32;
    TreeConfig tree{};
};

struct EngineStats {
    std::size_t rules = 0;
    std::size_t tree_nodes = 0;
    std::size_t tree_depth = 0;
    std::size_t tree_rules = 0;
    std::vector<std::size_t> learned_set_sizes;
    std::vector<std::uint32_t> learned_max_errors;
};

/// Accelerated classifier. Results are identical to classify_linear on the
/// same ruleset: learned sets and the tree each return the best-ranked match
/// among their own rules, and the overall answer is the best of those.
class ClassifierEngine {
public:
    static std::shared_ptr<const ClassifierEngine> build(std::shared_ptr<const RuleSet> ruleset,
                                                          EngineConfig config = {});

    std::optional<Match> classify(std::span<const FieldValue> key) const;

    const RuleSet& ruleset() const noexcept { return *ruleset_; }
    std::shared_ptr<const RuleSet> ruleset_ptr() const noexcept { return ruleset_; }
    const EngineConfig& config() const noexcept { return config_; }
    EngineStats stats() const;
    std::span<const LearnedPartition> learned_sets() const noexcept { return learned_; }

private:
    ClassifierEngine(std::shared_ptr<const RuleSet> ruleset, EngineConfig config);

    std::shared_ptr<const RuleSet> ruleset_;
    EngineConfig config_;
    RankedBoxes boxes_;
    std::vector<LearnedPartition> learned_;
    DecisionTree tree_;
    std::size_t tree_rules_ = 0;
};

}  // namespace reflex::classify
