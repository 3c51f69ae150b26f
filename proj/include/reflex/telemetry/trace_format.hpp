#pragma once

#include "reflex/telemetry/int_report.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflex::telemetry {

// Line-oriented INT trace format, one report per line:
//
//   INT flow=<sip>:<sport>-<dip>:<dport>/<proto> seq=<n> size=<bytes>
//       hops=[swid:inport:outport:qid:qdepth:hoplat:util:ts;...] drop=<idx>:<reason>|-
//
// Addresses are dotted quads, integers decimal, util fixed point with four
// decimals. Blank lines and lines starting with '#' are ignored by read_trace.

std::optional<std::uint32_t> parse_ipv4(std::string_view text);

std::string format_report(const IntReport& report);

/// Throws TelemetryError{Parse} carrying `line_no` on malformed input.
IntReport parse_report(std::string_view line, std::size_t line_no = 0);

void write_trace(std::ostream& out, std::span<const IntReport> reports);
std::vector<IntReport> read_trace(std::istream& in);
std::vector<IntReport> read_trace_file(const std::string& path);

}  // namespace reflex::telemetry
