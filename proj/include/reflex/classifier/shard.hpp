#pragma once

#include "reflex/classifier/ruleset.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace reflex::classify {

enum class ShardMode { Replicate, PartitionByHash };

/// Keys are hashed on the top 8 bits of src_ip.
inline constexpr unsigned kShardBucketBits = 8;

std::size_t shard_of_key(std::span<const FieldValue> key, std::size_t shards) noexcept;

/// Replicate: `shards` copies of the set. PartitionByHash: shard i holds every
/// rule whose src_ip range touches a bucket hashed to i, so a key classified on
/// its own shard sees every rule it could match. Throws InvalidShardCount for 0.
std::vector<std::shared_ptr<const RuleSet>> shard_ruleset(const std::shared_ptr<const RuleSet>& ruleset,
                                                          std::size_t shards, ShardMode mode);

/// Best match across all shards (the union semantics a caller gets by fanning out).
std::optional<Match> classify_sharded(std::span<const std::shared_ptr<const RuleSet>> shards,
                                      std::span<const FieldValue> key);

}  // namespace reflex::classify
