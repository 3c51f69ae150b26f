#include "reflex/scenario/csv.hpp"

#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reflex::scenario {

namespace fs = std::filesystem;

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cells.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cells.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else {
            cells.back() += c;
        }
    }
    return cells;
}

}  // namespace

ResultRow make_row(std::string scenario, std::string experiment, double load_rps, const sim::LatencyStats& stats) {
    return ResultRow{std::move(scenario), std::move(experiment), load_rps, stats.count, stats.drop_count,
                     stats.mean_ns,       stats.p50_ns,          stats.p99_ns, stats.max_ns};
}

std::string format_row(const ResultRow& r) {
    return fmt::format("{},{},{:.1f},{},{},{:.1f},{},{},{}", quote(r.scenario), quote(r.experiment), r.load_rps, r.count,
                       r.drops, r.mean_ns, r.p50_ns, r.p99_ns, r.max_ns);
}

std::string format_csv(std::span<const ResultRow> rows) {
    std::string out;
    out += kCsvVersionLine;
    out += '\n';
    out += kCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

std::vector<ResultRow> parse_csv(std::string_view text) {
    std::vector<ResultRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header) {
            if (line != kCsvHeader) {
                throw std::runtime_error(fmt::format("line {}: unexpected CSV header", line_no));
            }
            header = true;
            continue;
        }
        const auto c = split_line(line);
        if (c.size() != 9) {
            throw std::runtime_error(fmt::format("line {}: expected 9 columns, got {}", line_no, c.size()));
        }
        try {
            rows.push_back(ResultRow{c[0], c[1], std::stod(c[2]), std::stoull(c[3]), std::stoull(c[4]), std::stod(c[5]),
                                     std::stoull(c[6]), std::stoull(c[7]), std::stoull(c[8])});
        } catch (const std::logic_error&) {
            throw std::runtime_error(fmt::format("line {}: malformed number", line_no));
        }
    }
    return rows;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
    const fs::path target(path);
    std::error_code ec;
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path(), ec);
        if (ec) {
            throw std::runtime_error("cannot create directory " + target.parent_path().string() + ": " + ec.message());
        }
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename onto " + path + ": " + ec.message());
    }
}

}  // namespace reflex::scenario
