#include "reflex/classifier/rule_parser.hpp"

#include "reflex/telemetry/int_report.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

namespace reflex::classify {

namespace {

struct LineContext {
    std::size_t line_no;

    [[noreturn]] void fail(ClassifierError::Code code, const std::string& what) const {
        throw ClassifierError(code, "line " + std::to_string(line_no) + ": " + what, line_no);
    }
    [[noreturn]] void fail(const std::string& what) const { fail(ClassifierError::Code::Parse, what); }
};

std::vector<std::string_view> split_ws(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t') {
            ++i;
        }
        if (i > start) {
            out.push_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::vector<std::string_view> split_on(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

/// ClassBench writes port ranges as "lo : hi"; glue them into one token.
std::string glue_colons(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i] == '\t' ? ' ' : text[i];
        if (c == ' ') {
            std::size_t j = i;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) {
                ++j;
            }
            const bool before_colon = j < text.size() && text[j] == ':';
            const bool after_colon = !out.empty() && out.back() == ':';
            if (!before_colon && !after_colon) {
                out.push_back(' ');
            }
            i = j - 1;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

template <class T>
std::optional<T> parse_int(std::string_view text) {
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        base = 16;
        text.remove_prefix(2);
    }
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

FieldValue require_value(const LineContext& ctx, std::string_view text, const FieldDescriptor& field) {
    auto v = parse_int<std::uint64_t>(text);
    if (!v) {
        ctx.fail("bad " + field.name + " value '" + std::string(text) + "'");
    }
    if (*v > field.max_value()) {
        ctx.fail(ClassifierError::Code::InvalidRange, field.name + " value " + std::string(text) + " exceeds field width");
    }
    return static_cast<FieldValue>(*v);
}

FieldMatcher parse_prefix(const LineContext& ctx, std::string_view text, const FieldDescriptor& field) {
    const std::size_t slash = text.find('/');
    if (slash == std::string_view::npos) {
        ctx.fail("expected <ip>/<len> for " + field.name + ", got '" + std::string(text) + "'");
    }
    const auto ip = telemetry::parse_ipv4(text.substr(0, slash));
    const auto len = parse_int<unsigned>(text.substr(slash + 1));
    if (!ip || !len) {
        ctx.fail("malformed prefix '" + std::string(text) + "' for " + field.name);
    }
    try {
        return FieldMatcher::prefix(field, *ip, *len);
    } catch (const ClassifierError& e) {
        ctx.fail(e.code(), e.what());
    }
}

FieldMatcher parse_range(const LineContext& ctx, std::string_view text, const FieldDescriptor& field) {
    const std::size_t colon = text.find(':');
    if (colon == std::string_view::npos) {
        ctx.fail("expected <lo>:<hi> for " + field.name + ", got '" + std::string(text) + "'");
    }
    const FieldValue lo = require_value(ctx, text.substr(0, colon), field);
    const FieldValue hi = require_value(ctx, text.substr(colon + 1), field);
    if (lo > hi) {
        ctx.fail(ClassifierError::Code::InvalidRange,
                 field.name + " range " + std::string(text) + " has lo > hi");
    }
    return FieldMatcher::range(lo, hi);
}

FieldMatcher parse_masked(const LineContext& ctx, std::string_view text, const FieldDescriptor& field) {
    const std::size_t slash = text.find('/');
    if (slash == std::string_view::npos) {
        ctx.fail("expected <value>/<mask> for " + field.name + ", got '" + std::string(text) + "'");
    }
    const FieldValue value = require_value(ctx, text.substr(0, slash), field);
    const FieldValue mask = require_value(ctx, text.substr(slash + 1), field);
    if (mask == 0) {
        return FieldMatcher::wildcard(field);
    }
    if (mask == field.max_value()) {
        return FieldMatcher::exact(value);
    }
    // Only contiguous high-bit masks describe a single range.
    const unsigned shift = 32 - field.bit_width;
    const FieldValue aligned = mask << shift;
    const auto len = static_cast<unsigned>(std::countl_one(aligned));
    if ((aligned << len) != 0) {
        ctx.fail(ClassifierError::Code::InvalidPrefix, field.name + " mask " + std::string(text.substr(slash + 1)) +
                                                           " is not a contiguous prefix");
    }
    return FieldMatcher::prefix(field, value, len);
}

FieldMatcher parse_extension(const LineContext& ctx, std::string_view text, const FieldDescriptor& field) {
    if (text == "*") {
        return FieldMatcher::wildcard(field);
    }
    if (text.find(':') != std::string_view::npos) {
        return parse_range(ctx, text, field);
    }
    if (field.name == "drop_reason") {
        if (auto reason = telemetry::parse_drop_reason(text)) {
            return FieldMatcher::exact(static_cast<FieldValue>(*reason));
        }
    }
    return FieldMatcher::exact(require_value(ctx, text, field));
}

Action parse_action(const LineContext& ctx, std::string_view text) {
    Action action;
    std::string_view dests = text;
    const std::size_t brace = text.find('{');
    if (brace != std::string_view::npos) {
        dests = text.substr(0, brace);
        const std::size_t close = text.find('}', brace);
        if (close == std::string_view::npos || !trim(text.substr(close + 1)).empty()) {
            ctx.fail("projection list must be a trailing '{...}'");
        }
        action.projection.reset();
        const auto body = trim(text.substr(brace + 1, close - brace - 1));
        if (!body.empty()) {
            for (auto name : split_on(body, ',')) {
                name = trim(name);
                const auto field = parse_report_field(name);
                if (!field) {
                    ctx.fail(ClassifierError::Code::UnknownProjectionField,
                             "unknown projection field '" + std::string(name) + "'");
                }
                action.projection.set(static_cast<std::size_t>(*field));
            }
        }
    }
    dests = trim(dests);
    if (dests.empty()) {
        ctx.fail(ClassifierError::Code::EmptyDestinations, "action has no destinations");
    }
    for (auto d : split_on(dests, ',')) {
        d = trim(d);
        if (d.empty()) {
            ctx.fail(ClassifierError::Code::EmptyDestinations, "empty monitor id in destination list");
        }
        action.destinations.emplace_back(d);
    }
    return action;
}

struct ParsedRule {
    Rule rule;
    bool explicit_priority = false;
    bool explicit_id = false;
};

ParsedRule parse_rule_line(const LineContext& ctx, std::string_view line, const Schema& schema) {
    if (schema.size() < kFlowFieldCount) {
        ctx.fail(ClassifierError::Code::ArityMismatch, "schema must start with the five flow fields");
    }
    ParsedRule parsed;
    std::string_view match_part = line;
    std::optional<std::string_view> action_part;
    if (const std::size_t arrow = line.find("->"); arrow != std::string_view::npos) {
        match_part = line.substr(0, arrow);
        action_part = line.substr(arrow + 2);
    }
    const std::string glued = glue_colons(match_part);
    auto tokens = split_ws(glued);
    if (tokens.empty() || tokens[0].front() != '@') {
        ctx.fail("rule must start with '@'");
    }
    tokens[0].remove_prefix(1);

    // Options may appear anywhere after the field columns.
    std::vector<std::string_view> fields;
    for (auto tok : tokens) {
        if (tok.starts_with("prio=")) {
            auto p = parse_int<std::int64_t>(tok.substr(5));
            if (!p && tok.size() > 6 && tok[5] == '-') {
                p = parse_int<std::int64_t>(tok.substr(6));
                if (p) {
                    *p = -*p;
                }
            }
            if (!p) {
                ctx.fail("bad priority '" + std::string(tok) + "'");
            }
            parsed.rule.priority = *p;
            parsed.explicit_priority = true;
        } else if (tok.starts_with("id=")) {
            auto id = parse_int<std::uint32_t>(tok.substr(3));
            if (!id) {
                ctx.fail("bad rule id '" + std::string(tok) + "'");
            }
            parsed.rule.rule_id = *id;
            parsed.explicit_id = true;
        } else {
            fields.push_back(tok);
        }
    }
    if (fields.size() < kFlowFieldCount) {
        ctx.fail(ClassifierError::Code::ArityMismatch,
                 "expected at least 5 match fields, got " + std::to_string(fields.size()));
    }
    auto& m = parsed.rule.matchers;
    m.push_back(parse_prefix(ctx, fields[0], schema[0]));
    m.push_back(parse_prefix(ctx, fields[1], schema[1]));
    m.push_back(parse_range(ctx, fields[2], schema[2]));
    m.push_back(parse_range(ctx, fields[3], schema[3]));
    m.push_back(parse_masked(ctx, fields[4], schema[4]));

    std::size_t next = kFlowFieldCount;
    // ClassBench's trailing flags column (value/mask) carries no classification meaning here.
    if (next < fields.size() && fields[next].find('/') != std::string_view::npos) {
        ++next;
    }
    const std::size_t ext_expected = schema.size() - kFlowFieldCount;
    const std::size_t ext_given = fields.size() - next;
    if (ext_given != 0 && ext_given != ext_expected) {
        ctx.fail(ClassifierError::Code::ArityMismatch, "expected " + std::to_string(ext_expected) +
                                                           " extension fields, got " + std::to_string(ext_given));
    }
    for (std::size_t i = kFlowFieldCount; i < schema.size(); ++i) {
        m.push_back(ext_given == 0 ? FieldMatcher::wildcard(schema[i]) : parse_extension(ctx, fields[next++], schema[i]));
    }
    if (action_part) {
        parsed.rule.action = parse_action(ctx, *action_part);
    } else {
        parsed.rule.action.destinations = {std::string(kDefaultMonitor)};
    }
    return parsed;
}

std::string format_ip_prefix(const FieldMatcher& m, const FieldDescriptor& field) {
    unsigned len = m.prefix_len();
    if (m.kind() == FieldMatcher::Kind::Wildcard) {
        len = 0;
    } else if (m.kind() != FieldMatcher::Kind::Prefix) {
        const std::uint64_t span = std::uint64_t{m.hi()} - m.lo() + 1;
        if (!std::has_single_bit(span) || (m.lo() & (span - 1)) != 0) {
            throw ClassifierError(ClassifierError::Code::InvalidPrefix,
                                  field.name + " range is not expressible as a prefix");
        }
        len = field.bit_width - static_cast<unsigned>(std::countr_zero(span));
    }
    return telemetry::format_ipv4(m.lo()) + "/" + std::to_string(len);
}

std::string hex_byte(FieldValue v) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string s = "0x";
    s.push_back(digits[(v >> 4) & 0xf]);
    s.push_back(digits[v & 0xf]);
    return s;
}

}  // namespace

std::shared_ptr<const RuleSet> parse_ruleset(std::string_view text, const Schema& schema) {
    std::vector<ParsedRule> parsed;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const auto line = trim(text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
        ++line_no;
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        parsed.push_back(parse_rule_line(LineContext{line_no}, line, schema));
    }
    const auto n = static_cast<std::int64_t>(parsed.size());
    std::vector<Rule> rules;
    rules.reserve(parsed.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        auto& p = parsed[i];
        if (!p.explicit_priority) {
            p.rule.priority = n - static_cast<std::int64_t>(i);
        }
        if (!p.explicit_id) {
            p.rule.rule_id = static_cast<std::uint32_t>(i);
        }
        rules.push_back(std::move(p.rule));
    }
    return RuleSet::create(schema, std::move(rules));
}

std::shared_ptr<const RuleSet> read_ruleset_file(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open rule file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ruleset(buf.str(), schema);
}

std::string format_rule(const Rule& rule, const Schema& schema) {
    const auto& m = rule.matchers;
    std::string out = "@" + format_ip_prefix(m[0], schema[0]) + " " + format_ip_prefix(m[1], schema[1]);
    for (std::size_t i = 2; i < 4; ++i) {
        out += " " + std::to_string(m[i].lo()) + ":" + std::to_string(m[i].hi());
    }
    const auto& proto = m[4];
    if (proto.covers_all(schema[4])) {
        out += " 0x00/0x00";
    } else if (proto.lo() == proto.hi()) {
        out += " " + hex_byte(proto.lo()) + "/0xFF";
    } else {
        const std::uint64_t span = std::uint64_t{proto.hi()} - proto.lo() + 1;
        if (!std::has_single_bit(span) || (proto.lo() & (span - 1)) != 0) {
            throw ClassifierError(ClassifierError::Code::InvalidPrefix, "proto range is not a value/mask pair");
        }
        out += " " + hex_byte(proto.lo()) + "/" + hex_byte(schema[4].max_value() & ~static_cast<FieldValue>(span - 1));
    }
    for (std::size_t i = kFlowFieldCount; i < schema.size(); ++i) {
        const auto& f = m[i];
        if (f.covers_all(schema[i])) {
            out += " *";
        } else if (f.lo() == f.hi()) {
            if (schema[i].name == "drop_reason" && f.lo() >= 1 && f.lo() <= 4) {
                out += " " + std::string(telemetry::to_string(static_cast<telemetry::DropReason>(f.lo())));
            } else {
                out += " " + std::to_string(f.lo());
            }
        } else {
            out += " " + std::to_string(f.lo()) + ":" + std::to_string(f.hi());
        }
    }
    out += " prio=" + std::to_string(rule.priority) + " id=" + std::to_string(rule.rule_id) + " -> ";
    for (std::size_t i = 0; i < rule.action.destinations.size(); ++i) {
        out += (i ? "," : "") + rule.action.destinations[i];
    }
    if (rule.action.projection != full_projection()) {
        out += " {";
        bool first = true;
        for (std::size_t i = 0; i < rule.action.projection.size(); ++i) {
            if (rule.action.projection.test(i)) {
                out += (first ? "" : ",") + std::string(to_string(static_cast<ReportField>(i)));
                first = false;
            }
        }
        out += "}";
    }
    return out;
}

std::string format_ruleset(const RuleSet& ruleset) {
    std::string out;
    for (const auto& rule : ruleset.rules()) {
        out += format_rule(rule, ruleset.schema());
        out += '\n';
    }
    return out;
}

}  // namespace reflex::classify
