#pragma once

#include "reflex/simnet/stats.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflex::scenario {

/// First line of every results file. Bump the version when columns change.
inline constexpr std::string_view kCsvVersionLine = "# reflex-results v1";
inline constexpr std::string_view kCsvHeader = "scenario,experiment,load_rps,count,drops,mean_ns,p50_ns,p99_ns,max_ns";

struct ResultRow {
    std::string scenario;
    std::string experiment;
    double load_rps = 0.0;
    std::uint64_t count = 0;
    std::uint64_t drops = 0;
    double mean_ns = 0.0;
    sim::VirtualTime p50_ns = 0;
    sim::VirtualTime p99_ns = 0;
    sim::VirtualTime max_ns = 0;

    bool operator==(const ResultRow&) const = default;
};

ResultRow make_row(std::string scenario, std::string experiment, double load_rps, const sim::LatencyStats& stats);

std::string format_row(const ResultRow& row);
/// Version line, header, then one line per row.
std::string format_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> parse_csv(std::string_view text);

/// Writes to a temporary sibling and renames it over `path`, creating parent
/// directories. Throws std::runtime_error on IO failure.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace reflex::scenario
