#include "reflex/telemetry/trace_format.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace reflex::telemetry {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
    throw TelemetryError(TelemetryError::Code::Parse, "line " + std::to_string(line_no) + ": " + what, line_no);
}

template <class T>
T parse_number(std::string_view text, std::size_t line_no, std::string_view what) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        fail(line_no, "bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
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

std::string format_utilization(std::uint32_t e4) {
    std::string frac = std::to_string(e4 % kUtilizationScale);
    frac.insert(0, 4 - frac.size(), '0');
    return std::to_string(e4 / kUtilizationScale) + "." + frac;
}

std::uint32_t parse_utilization(std::string_view text, std::size_t line_no) {
    const std::size_t dot = text.find('.');
    if (dot == std::string_view::npos || text.size() - dot - 1 != 4) {
        fail(line_no, "utilization must have exactly four decimals: '" + std::string(text) + "'");
    }
    const auto whole = parse_number<std::uint32_t>(text.substr(0, dot), line_no, "utilization");
    const auto frac = parse_number<std::uint32_t>(text.substr(dot + 1), line_no, "utilization");
    return whole * kUtilizationScale + frac;
}

// <ip>:<port>
std::pair<std::uint32_t, std::uint16_t> parse_endpoint(std::string_view text, std::size_t line_no) {
    const std::size_t colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        fail(line_no, "endpoint missing port: '" + std::string(text) + "'");
    }
    auto ip = parse_ipv4(text.substr(0, colon));
    if (!ip) {
        fail(line_no, "bad IPv4 address '" + std::string(text.substr(0, colon)) + "'");
    }
    return {*ip, parse_number<std::uint16_t>(text.substr(colon + 1), line_no, "port")};
}

FlowKey parse_flow(std::string_view text, std::size_t line_no) {
    const std::size_t slash = text.rfind('/');
    const std::size_t dash = text.find('-');
    if (slash == std::string_view::npos || dash == std::string_view::npos || dash > slash) {
        fail(line_no, "malformed flow '" + std::string(text) + "'");
    }
    FlowKey flow;
    std::tie(flow.src_ip, flow.src_port) = parse_endpoint(text.substr(0, dash), line_no);
    std::tie(flow.dst_ip, flow.dst_port) = parse_endpoint(text.substr(dash + 1, slash - dash - 1), line_no);
    flow.proto = parse_number<std::uint8_t>(text.substr(slash + 1), line_no, "protocol");
    return flow;
}

HopMetadata parse_hop(std::string_view text, std::size_t line_no) {
    const auto parts = split(text, ':');
    if (parts.size() != 8) {
        fail(line_no, "hop record needs 8 fields, got " + std::to_string(parts.size()));
    }
    HopMetadata hop;
    hop.switch_id = parse_number<std::uint32_t>(parts[0], line_no, "switch id");
    hop.ingress_port = parse_number<std::uint32_t>(parts[1], line_no, "ingress port");
    hop.egress_port = parse_number<std::uint32_t>(parts[2], line_no, "egress port");
    hop.queue_id = parse_number<std::uint32_t>(parts[3], line_no, "queue id");
    hop.queue_depth = parse_number<std::uint32_t>(parts[4], line_no, "queue depth");
    hop.hop_latency_ns = parse_number<VirtualTime>(parts[5], line_no, "hop latency");
    hop.utilization_e4 = parse_utilization(parts[6], line_no);
    hop.timestamp_ns = parse_number<VirtualTime>(parts[7], line_no, "timestamp");
    return hop;
}

std::string_view expect_field(std::string_view token, std::string_view key, std::size_t line_no) {
    if (token.size() <= key.size() || token.substr(0, key.size()) != key || token[key.size()] != '=') {
        fail(line_no, "expected '" + std::string(key) + "=', got '" + std::string(token) + "'");
    }
    return token.substr(key.size() + 1);
}

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
    const auto parts = split(text, '.');
    if (parts.size() != 4) {
        return std::nullopt;
    }
    std::uint32_t ip = 0;
    for (auto part : parts) {
        unsigned octet = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), octet);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size() || octet > 255) {
            return std::nullopt;
        }
        ip = (ip << 8) | octet;
    }
    return ip;
}

std::string format_report(const IntReport& report) {
    std::string out = "INT flow=" + report.flow.to_string() + " seq=" + std::to_string(report.seq) +
                      " size=" + std::to_string(report.pkt_size_bytes) + " hops=[";
    for (std::size_t i = 0; i < report.hops.size(); ++i) {
        const auto& h = report.hops[i];
        if (i > 0) {
            out += ';';
        }
        out += std::to_string(h.switch_id) + ":" + std::to_string(h.ingress_port) + ":" + std::to_string(h.egress_port) +
               ":" + std::to_string(h.queue_id) + ":" + std::to_string(h.queue_depth) + ":" +
               std::to_string(h.hop_latency_ns) + ":" + format_utilization(h.utilization_e4) + ":" +
               std::to_string(h.timestamp_ns);
    }
    out += "] drop=";
    if (report.drop) {
        out += std::to_string(report.drop->hop_index) + ":" + std::string(to_string(report.drop->reason));
    } else {
        out += "-";
    }
    return out;
}

IntReport parse_report(std::string_view line, std::size_t line_no) {
    std::vector<std::string_view> tokens;
    for (auto tok : split(line, ' ')) {
        if (!tok.empty()) {
            tokens.push_back(tok);
        }
    }
    if (tokens.size() != 6 || tokens[0] != "INT") {
        fail(line_no, "expected 'INT flow=... seq=... size=... hops=[...] drop=...'");
    }
    IntReport report;
    report.flow = parse_flow(expect_field(tokens[1], "flow", line_no), line_no);
    report.seq = parse_number<std::uint64_t>(expect_field(tokens[2], "seq", line_no), line_no, "seq");
    report.pkt_size_bytes = parse_number<std::uint32_t>(expect_field(tokens[3], "size", line_no), line_no, "size");
    const auto hops = expect_field(tokens[4], "hops", line_no);
    if (hops.size() < 2 || hops.front() != '[' || hops.back() != ']') {
        fail(line_no, "hops must be bracketed");
    }
    const auto body = hops.substr(1, hops.size() - 2);
    if (body.empty()) {
        fail(line_no, "report has no hops");
    }
    for (auto hop : split(body, ';')) {
        report.hops.push_back(parse_hop(hop, line_no));
    }
    const auto drop = expect_field(tokens[5], "drop", line_no);
    if (drop != "-") {
        const std::size_t colon = drop.find(':');
        if (colon == std::string_view::npos) {
            fail(line_no, "drop must be '<idx>:<reason>' or '-'");
        }
        const auto reason = parse_drop_reason(drop.substr(colon + 1));
        if (!reason) {
            fail(line_no, "unknown drop reason '" + std::string(drop.substr(colon + 1)) + "'");
        }
        report.drop = DropInfo{parse_number<std::uint32_t>(drop.substr(0, colon), line_no, "drop index"), *reason};
    }
    try {
        validate(report);
    } catch (const TelemetryError& e) {
        fail(line_no, e.what());
    }
    return report;
}

void write_trace(std::ostream& out, std::span<const IntReport> reports) {
    for (const auto& r : reports) {
        out << format_report(r) << '\n';
    }
}

std::vector<IntReport> read_trace(std::istream& in) {
    std::vector<IntReport> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        out.push_back(parse_report(std::string_view(line).substr(first), line_no));
    }
    return out;
}

std::vector<IntReport> read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open trace file '" + path + "'");
    }
    return read_trace(in);
}

}  // namespace reflex::telemetry
