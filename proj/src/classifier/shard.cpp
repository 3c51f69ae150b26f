#include "reflex/classifier/shard.hpp"

#include "reflex/simnet/rng.hpp"

namespace reflex::classify {

namespace {

std::size_t bucket_shard(std::uint32_t bucket, std::size_t shards) noexcept {
    return static_cast<std::size_t>(sim::splitmix64(bucket) % shards);
}

}  // namespace

std::size_t shard_of_key(std::span<const FieldValue> key, std::size_t shards) noexcept {
    return bucket_shard(key[static_cast<std::size_t>(Field::SrcIp)] >> (32 - kShardBucketBits), shards);
}

std::vector<std::shared_ptr<const RuleSet>> shard_ruleset(const std::shared_ptr<const RuleSet>& ruleset,
                                                          std::size_t shards, ShardMode mode) {
    if (shards == 0) {
        throw ClassifierError(ClassifierError::Code::InvalidShardCount, "shard count must be at least 1");
    }
    std::vector<std::shared_ptr<const RuleSet>> out;
    if (mode == ShardMode::Replicate || shards == 1) {
        out.assign(shards, ruleset);
        return out;
    }
    std::vector<std::vector<Rule>> parts(shards);
    const auto sip = static_cast<std::size_t>(Field::SrcIp);
    for (const auto& rule : ruleset->rules()) {
        const std::uint32_t first = rule.matchers[sip].lo() >> (32 - kShardBucketBits);
        const std::uint32_t last = rule.matchers[sip].hi() >> (32 - kShardBucketBits);
        std::vector<bool> hit(shards, false);
        for (std::uint32_t b = first; b <= last; ++b) {
            hit[bucket_shard(b, shards)] = true;
        }
        for (std::size_t s = 0; s < shards; ++s) {
            if (hit[s]) {
                parts[s].push_back(rule);
            }
        }
    }
    for (auto& part : parts) {
        out.push_back(RuleSet::create(ruleset->schema(), std::move(part)));
    }
    return out;
}

std::optional<Match> classify_sharded(std::span<const std::shared_ptr<const RuleSet>> shards,
                                      std::span<const FieldValue> key) {
    std::optional<Match> best;
    for (const auto& shard : shards) {
        auto m = classify_linear(*shard, key);
        if (m && (!best || beats(m->priority, m->rule_id, best->priority, best->rule_id))) {
            best = m;
        }
    }
    return best;
}

}  // namespace reflex::classify
