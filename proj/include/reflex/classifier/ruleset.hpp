#pragma once

#include <bitset>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reflex::classify {

using FieldValue = std::uint32_t;
using PacketKey = std::vector<FieldValue>;
using MonitorId = std::string;

struct FieldDescriptor {
    std::string name;
    unsigned bit_width = 32;

    FieldValue max_value() const noexcept {
        return bit_width >= 32 ? ~FieldValue{0} : static_cast<FieldValue>((FieldValue{1} << bit_width) - 1);
    }
    bool operator==(const FieldDescriptor&) const = default;
};

using Schema = std::vector<FieldDescriptor>;

/// Field positions of the reflex-plane classification schema.
enum class Field : std::size_t {
    SrcIp = 0,
    DstIp,
    SrcPort,
    DstPort,
    Proto,
    SwitchId,
    LinkId,
    QueueId,
    DropReason,
};

inline constexpr std::size_t kFlowFieldCount = 5;

/// 5-tuple + switch_id + link_id + queue_id + drop_reason.
const Schema& reflex_schema();

class ClassifierError : public std::runtime_error {
public:
    enum class Code {
        Parse,
        ArityMismatch,
        InvalidRange,
        InvalidPrefix,
        DuplicateRuleId,
        DuplicateRule,
        EmptyDestinations,
        UnknownProjectionField,
        UnknownMonitor,
        InvalidShardCount,
    };

    ClassifierError(Code code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), code_(code), line_(line) {}
    Code code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    Code code_;
    std::size_t line_;
};

/// One field constraint. Every kind reduces to an inclusive range [lo, hi].
class FieldMatcher {
public:
    enum class Kind { Wildcard, Exact, Prefix, Range };

    static FieldMatcher wildcard(const FieldDescriptor& field);
    static FieldMatcher exact(FieldValue value);
    static FieldMatcher prefix(const FieldDescriptor& field, FieldValue value, unsigned prefix_len);
    static FieldMatcher range(FieldValue lo, FieldValue hi);

    Kind kind() const noexcept { return kind_; }
    FieldValue lo() const noexcept { return lo_; }
    FieldValue hi() const noexcept { return hi_; }
    unsigned prefix_len() const noexcept { return prefix_len_; }
    bool matches(FieldValue v) const noexcept { return lo_ <= v && v <= hi_; }
    bool covers_all(const FieldDescriptor& field) const noexcept { return lo_ == 0 && hi_ == field.max_value(); }

    /// Matchers compare by the set of values they accept.
    bool operator==(const FieldMatcher& o) const noexcept { return lo_ == o.lo_ && hi_ == o.hi_; }

private:
    FieldMatcher(Kind kind, FieldValue lo, FieldValue hi, unsigned plen) : kind_(kind), lo_(lo), hi_(hi), prefix_len_(plen) {}

    Kind kind_;
    FieldValue lo_;
    FieldValue hi_;
    unsigned prefix_len_;
};

/// Report fields a rule may forward to monitors. The flow key is always kept.
enum class ReportField : std::size_t {
    Seq = 0,
    PktSize,
    SwitchId,
    IngressPort,
    EgressPort,
    QueueId,
    QueueDepth,
    HopLatency,
    LinkUtilization,
    Timestamp,
    Drop,
    kCount,
};

using FieldSet = std::bitset<static_cast<std::size_t>(ReportField::kCount)>;

std::string_view to_string(ReportField field);
std::optional<ReportField> parse_report_field(std::string_view name);
FieldSet full_projection();

struct Action {
    std::vector<MonitorId> destinations;
    FieldSet projection = full_projection();

    bool operator==(const Action&) const = default;
};

struct Rule {
    std::uint32_t rule_id = 0;
    std::int64_t priority = 0;  ///< higher wins
    std::vector<FieldMatcher> matchers;
    Action action;

    bool matches(std::span<const FieldValue> key) const noexcept;
};

struct Match {
    std::uint32_t rule_id = 0;
    std::int64_t priority = 0;
    const Action* action = nullptr;

    bool operator==(const Match& o) const noexcept { return rule_id == o.rule_id && priority == o.priority; }
};

/// Validated, immutable rule collection.
class RuleSet {
public:
    /// Throws ClassifierError when the rules violate the set invariants.
    static std::shared_ptr<const RuleSet> create(Schema schema, std::vector<Rule> rules);

    const Schema& schema() const noexcept { return schema_; }
    std::span<const Rule> rules() const noexcept { return rules_; }
    std::size_t size() const noexcept { return rules_.size(); }
    bool empty() const noexcept { return rules_.empty(); }

    /// Rule indices ordered best-first: priority descending, then rule_id ascending.
    std::span<const std::uint32_t> by_rank() const noexcept { return by_rank_; }
    const Rule& ranked(std::uint32_t rank) const noexcept { return rules_[by_rank_[rank]]; }
    Match match_for_rank(std::uint32_t rank) const noexcept;

    /// Every monitor named by some rule action.
    std::vector<MonitorId> destinations() const;

private:
    RuleSet() = default;

    Schema schema_;
    std::vector<Rule> rules_;
    std::vector<std::uint32_t> by_rank_;
};

/// True when `a` should win over `b`.
inline bool beats(std::int64_t prio_a, std::uint32_t id_a, std::int64_t prio_b, std::uint32_t id_b) noexcept {
    return prio_a != prio_b ? prio_a > prio_b : id_a < id_b;
}

void check_arity(const Schema& schema, std::span<const FieldValue> key);

/// Reference classifier: scans every rule.
std::optional<Match> classify_linear(const RuleSet& ruleset, std::span<const FieldValue> key);

}  // namespace reflex::classify
