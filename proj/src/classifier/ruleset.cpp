#include "reflex/classifier/ruleset.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <utility>

namespace reflex::classify {

const Schema& reflex_schema() {
    static const Schema schema{
        {"src_ip", 32},   {"dst_ip", 32},  {"src_port", 16}, {"dst_port", 16},    {"proto", 8},
        {"switch_id", 32}, {"link_id", 32}, {"queue_id", 32}, {"drop_reason", 8},
    };
    return schema;
}

FieldMatcher FieldMatcher::wildcard(const FieldDescriptor& field) {
    return FieldMatcher(Kind::Wildcard, 0, field.max_value(), 0);
}

FieldMatcher FieldMatcher::exact(FieldValue value) { return FieldMatcher(Kind::Exact, value, value, 0); }

FieldMatcher FieldMatcher::prefix(const FieldDescriptor& field, FieldValue value, unsigned prefix_len) {
    if (prefix_len > field.bit_width) {
        throw ClassifierError(ClassifierError::Code::InvalidPrefix,
                              "prefix length " + std::to_string(prefix_len) + " exceeds width of " + field.name);
    }
    const unsigned host_bits = field.bit_width - prefix_len;
    const std::uint64_t span = (std::uint64_t{1} << host_bits) - 1;
    const auto lo = static_cast<FieldValue>(value & ~span & field.max_value());
    const auto hi = static_cast<FieldValue>(lo | span);
    return FieldMatcher(Kind::Prefix, lo, hi, prefix_len);
}

FieldMatcher FieldMatcher::range(FieldValue lo, FieldValue hi) {
    if (lo > hi) {
        throw ClassifierError(ClassifierError::Code::InvalidRange,
                              "range " + std::to_string(lo) + ":" + std::to_string(hi) + " has lo > hi");
    }
    return FieldMatcher(Kind::Range, lo, hi, 0);
}

namespace {
constexpr std::array<std::string_view, static_cast<std::size_t>(ReportField::kCount)> kFieldNames{
    "seq",       "pkt_size",    "switch_id",        "ingress_port", "egress_port", "queue_id",
    "queue_depth", "hop_latency", "link_utilization", "timestamp",    "drop",
};
}  // namespace

std::string_view to_string(ReportField field) { return kFieldNames.at(static_cast<std::size_t>(field)); }

std::optional<ReportField> parse_report_field(std::string_view name) {
    for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
        if (kFieldNames[i] == name) {
            return static_cast<ReportField>(i);
        }
    }
    return std::nullopt;
}

FieldSet full_projection() { return FieldSet{}.set(); }

bool Rule::matches(std::span<const FieldValue> key) const noexcept {
    for (std::size_t i = 0; i < matchers.size(); ++i) {
        if (!matchers[i].matches(key[i])) {
            return false;
        }
    }
    return true;
}

std::shared_ptr<const RuleSet> RuleSet::create(Schema schema, std::vector<Rule> rules) {
    std::set<std::uint32_t> ids;
    std::set<std::pair<std::int64_t, std::vector<std::pair<FieldValue, FieldValue>>>> shapes;
    for (const auto& rule : rules) {
        if (rule.matchers.size() != schema.size()) {
            throw ClassifierError(ClassifierError::Code::ArityMismatch,
                                  "rule " + std::to_string(rule.rule_id) + " has " +
                                      std::to_string(rule.matchers.size()) + " matchers, schema has " +
                                      std::to_string(schema.size()));
        }
        if (!ids.insert(rule.rule_id).second) {
            throw ClassifierError(ClassifierError::Code::DuplicateRuleId,
                                  "duplicate rule id " + std::to_string(rule.rule_id));
        }
        if (rule.action.destinations.empty()) {
            throw ClassifierError(ClassifierError::Code::EmptyDestinations,
                                  "rule " + std::to_string(rule.rule_id) + " has no destinations");
        }
        std::vector<std::pair<FieldValue, FieldValue>> shape;
        shape.reserve(rule.matchers.size());
        for (std::size_t i = 0; i < rule.matchers.size(); ++i) {
            if (rule.matchers[i].hi() > schema[i].max_value()) {
                throw ClassifierError(ClassifierError::Code::InvalidRange,
                                      "rule " + std::to_string(rule.rule_id) + " exceeds width of " + schema[i].name);
            }
            shape.emplace_back(rule.matchers[i].lo(), rule.matchers[i].hi());
        }
        if (!shapes.emplace(rule.priority, std::move(shape)).second) {
            throw ClassifierError(ClassifierError::Code::DuplicateRule,
                                  "rule " + std::to_string(rule.rule_id) +
                                      " repeats another rule's priority and matchers");
        }
    }
    std::shared_ptr<RuleSet> rs(new RuleSet());
    rs->schema_ = std::move(schema);
    rs->rules_ = std::move(rules);
    rs->by_rank_.resize(rs->rules_.size());
    for (std::uint32_t i = 0; i < rs->by_rank_.size(); ++i) {
        rs->by_rank_[i] = i;
    }
    const auto& r = rs->rules_;
    std::sort(rs->by_rank_.begin(), rs->by_rank_.end(), [&r](std::uint32_t a, std::uint32_t b) {
        return beats(r[a].priority, r[a].rule_id, r[b].priority, r[b].rule_id);
    });
    return rs;
}

Match RuleSet::match_for_rank(std::uint32_t rank) const noexcept {
    const Rule& rule = ranked(rank);
    return Match{rule.rule_id, rule.priority, &rule.action};
}

std::vector<MonitorId> RuleSet::destinations() const {
    std::set<MonitorId> all;
    for (const auto& rule : rules_) {
        all.insert(rule.action.destinations.begin(), rule.action.destinations.end());
    }
    return {all.begin(), all.end()};
}

void check_arity(const Schema& schema, std::span<const FieldValue> key) {
    if (key.size() != schema.size()) {
        throw ClassifierError(ClassifierError::Code::ArityMismatch, "key has " + std::to_string(key.size()) +
                                                                        " fields, schema has " +
                                                                        std::to_string(schema.size()));
    }
}

std::optional<Match> classify_linear(const RuleSet& ruleset, std::span<const FieldValue> key) {
    check_arity(ruleset.schema(), key);
    const Rule* best = nullptr;
    for (const auto& rule : ruleset.rules()) {
        if (rule.matches(key) && (best == nullptr || beats(rule.priority, rule.rule_id, best->priority, best->rule_id))) {
            best = &rule;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return Match{best->rule_id, best->priority, &best->action};
}

}  // namespace reflex::classify
