#pragma once

#include "reflex/classifier/ruleset.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace reflex::classify {

struct SynthParams {
    std::size_t rules = 100;
    std::uint64_t seed = 1;
    /// Fraction of rules constraining switch/link/queue/drop fields.
    double extension_fraction = 0.0;
    /// Number of distinct switches the extension constraints draw from.
    std::uint32_t switches = 16;
};

/// ACL-like rules: skewed prefix lengths, well-known and ephemeral port
/// ranges, TCP/UDP/any protocol. Priorities follow file order (N - i).
std::shared_ptr<const RuleSet> synth_acl(const SynthParams& params);

/// Half the keys fall inside a randomly chosen rule, the rest are uniform.
std::vector<PacketKey> synth_keys(const RuleSet& ruleset, std::size_t count, std::uint64_t seed);

}  // namespace reflex::classify
