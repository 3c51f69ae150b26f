#include "reflex/classifier/synth.hpp"

#include "reflex/simnet/rng.hpp"

#include <array>
#include <set>
#include <tuple>

namespace reflex::classify {

namespace {

using sim::CounterRng;

FieldMatcher synth_prefix(CounterRng& rng, const FieldDescriptor& field, const std::vector<std::uint32_t>& pool) {
    // ACL prefixes cluster at a few lengths and share a small address pool.
    static constexpr std::array<unsigned, 8> kLens{0, 8, 16, 24, 24, 28, 32, 32};
    const unsigned len = kLens[rng.below(kLens.size())];
    const std::uint32_t base = pool[rng.below(pool.size())] ^ static_cast<std::uint32_t>(rng.below(256));
    return FieldMatcher::prefix(field, base, len);
}

FieldMatcher synth_port(CounterRng& rng, bool dst) {
    static constexpr std::array<std::uint32_t, 10> kWellKnown{20, 21, 22, 23, 25, 53, 80, 123, 443, 8080};
    const auto roll = rng.below(10);
    if (!dst) {
        if (roll < 7) return FieldMatcher::range(0, 65535);
        if (roll < 9) return FieldMatcher::range(1024, 65535);
        return FieldMatcher::exact(kWellKnown[rng.below(kWellKnown.size())]);
    }
    if (roll < 2) return FieldMatcher::range(0, 65535);
    if (roll < 6) return FieldMatcher::exact(kWellKnown[rng.below(kWellKnown.size())]);
    if (roll < 8) {
        const auto lo = static_cast<FieldValue>(rng.uniform(1024, 60000));
        return FieldMatcher::range(lo, lo + static_cast<FieldValue>(rng.below(5000)));
    }
    if (roll < 9) return FieldMatcher::range(0, 1023);
    return FieldMatcher::range(1024, 65535);
}

}  // namespace

std::shared_ptr<const RuleSet> synth_acl(const SynthParams& params) {
    const Schema& schema = reflex_schema();
    auto rng = CounterRng::named(params.seed, "synth.acl");
    std::vector<std::uint32_t> pool(std::max<std::size_t>(8, params.rules / 8));
    for (auto& a : pool) {
        a = static_cast<std::uint32_t>(rng.next_u64());
    }

    std::vector<Rule> rules;
    std::set<std::vector<std::pair<FieldValue, FieldValue>>> shapes;
    const auto f = [&](Field x) -> const FieldDescriptor& { return schema[static_cast<std::size_t>(x)]; };
    std::size_t attempts = 0;
    while (rules.size() < params.rules && attempts < params.rules * 20) {
        ++attempts;
        Rule rule;
        rule.matchers.push_back(synth_prefix(rng, f(Field::SrcIp), pool));
        rule.matchers.push_back(synth_prefix(rng, f(Field::DstIp), pool));
        rule.matchers.push_back(synth_port(rng, false));
        rule.matchers.push_back(synth_port(rng, true));
        const auto proto = rng.below(4);
        rule.matchers.push_back(proto == 0 ? FieldMatcher::wildcard(f(Field::Proto))
                                           : FieldMatcher::exact(proto == 3 ? 17 : 6));
        const bool ext = rng.chance(params.extension_fraction);
        for (std::size_t d = kFlowFieldCount; d < schema.size(); ++d) {
            rule.matchers.push_back(FieldMatcher::wildcard(schema[d]));
        }
        if (ext) {
            const auto sw = static_cast<FieldValue>(rng.below(params.switches));
            rule.matchers[static_cast<std::size_t>(Field::SwitchId)] = FieldMatcher::exact(sw);
            if (rng.chance(0.3)) {
                rule.matchers[static_cast<std::size_t>(Field::QueueId)] =
                    FieldMatcher::range(0, static_cast<FieldValue>(rng.below(8)));
            }
            if (rng.chance(0.2)) {
                rule.matchers[static_cast<std::size_t>(Field::DropReason)] =
                    FieldMatcher::exact(static_cast<FieldValue>(rng.uniform(1, 4)));
            }
        }
        std::vector<std::pair<FieldValue, FieldValue>> shape;
        for (const auto& m : rule.matchers) {
            shape.emplace_back(m.lo(), m.hi());
        }
        if (!shapes.insert(shape).second) {
            continue;
        }
        rule.action.destinations = {"m0"};
        rules.push_back(std::move(rule));
    }
    const auto n = static_cast<std::int64_t>(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        rules[i].rule_id = static_cast<std::uint32_t>(i);
        rules[i].priority = n - static_cast<std::int64_t>(i);
    }
    return RuleSet::create(schema, std::move(rules));
}

std::vector<PacketKey> synth_keys(const RuleSet& ruleset, std::size_t count, std::uint64_t seed) {
    auto rng = CounterRng::named(seed, "synth.keys");
    const Schema& schema = ruleset.schema();
    std::vector<PacketKey> keys;
    keys.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        PacketKey key(schema.size());
        if (!ruleset.empty() && rng.chance(0.5)) {
            const Rule& r = ruleset.rules()[rng.below(ruleset.size())];
            for (std::size_t d = 0; d < schema.size(); ++d) {
                key[d] = static_cast<FieldValue>(rng.uniform(r.matchers[d].lo(), r.matchers[d].hi()));
            }
        } else {
            for (std::size_t d = 0; d < schema.size(); ++d) {
                // Extension fields stay small so switch-scoped rules get hit.
                const std::uint64_t hi = d < kFlowFieldCount ? schema[d].max_value() : std::min<FieldValue>(schema[d].max_value(), 31);
                key[d] = static_cast<FieldValue>(rng.uniform(0, hi));
            }
        }
        keys.push_back(std::move(key));
    }
    return keys;
}

}  // namespace reflex::classify
