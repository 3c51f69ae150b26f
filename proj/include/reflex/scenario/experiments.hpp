#pragma once

#include "reflex/classifier/engine.hpp"
#include "reflex/reflexplane/plane.hpp"
#include "reflex/scenario/config.hpp"
#include "reflex/scenario/csv.hpp"
#include "reflex/scenario/fixtures.hpp"

#include <iosfwd>
#include <map>
#include <stdexcept>

namespace reflex::scenario {

/// A run finished but produced a result that contradicts its own oracle
/// (classifier mismatch, wrong detections). Maps to exit code 3.
class AssertionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raft

/// Mean/percentiles of `requests` sequential writes, each issued after the
/// cluster has been idle for `idle_gap`.
sim::LatencyStats raft_isolated_latency(const raft::ClusterConfig& config, std::size_t requests,
                                        VirtualTime idle_gap = 20'000);

struct SweepPoint {
    double rate_rps = 0.0;
    std::size_t requests = 0;
    sim::LatencyStats stats;  ///< completed writes only; drop_count = network drops
    std::uint64_t unfinished = 0;
};

/// Open-loop writes at a fixed interval, no client retries.
SweepPoint raft_load_point(raft::ClusterConfig config, double rate_rps, std::size_t requests);

// Classifier

struct ClassifyResult {
    std::size_t keys = 0;
    std::size_t mismatches = 0;
    /// Decision histogram keyed by rule id; -1 counts keys with no match.
    std::map<std::int64_t, std::uint64_t> histogram;
};

classify::EngineConfig engine_config(EngineKind kind);

/// Classifies every key with `kind` and, unless it is linear, checks each
/// answer against the linear scan.
ClassifyResult bench_classify(std::shared_ptr<const classify::RuleSet> ruleset,
                              std::span<const classify::PacketKey> keys, EngineKind kind);

// Monitors

struct Detection {
    std::vector<monitor::ReflexCommand> commands;
    std::vector<std::size_t> report_index;  ///< report that caused each command
};

/// Feeds the stream straight into the detectors with a full projection.
Detection run_detectors(std::span<const monitor::MonitorSpec> specs, std::span<const telemetry::IntReport> reports,
                        const ElementPorts& ports);

// Plane

/// Stream index of the report behind each command of a fresh plane run.
std::vector<std::size_t> command_report_indices(const plane::RunReport& report);

/// Sustained reports/s at the monitor under overload, measured over the
/// middle half of the completions. Runs in direct mode without Raft.
double plane_throughput(plane::PlaneConfig config, std::size_t reports);

struct CapacityProbe {
    VirtualTime min_interval_ns = 0;  ///< smallest drop-free inter-report gap
    std::uint64_t max_rate_rps = 0;   ///< 1e9 / min_interval_ns
    std::uint64_t drops_below = 0;    ///< drops at min_interval_ns - 1
};

/// Finds the highest constant report rate a monitor with `service_ns` per
/// report absorbs without drops.
CapacityProbe monitor_capacity(VirtualTime service_ns, std::size_t reports = 20'000, std::size_t rx_capacity = 64);

// Driver

struct RunOptions {
    std::optional<std::string> out_dir;  ///< overrides output.dir
    bool trace_dump = false;
};

struct RunOutcome {
    std::vector<ResultRow> rows;
    std::string csv_path;
    std::vector<std::string> extra_files;
};

std::vector<ResultRow> run_experiment(const ScenarioConfig& config, Experiment experiment, std::ostream& log,
                                      std::ostream* trace_dump = nullptr);

/// Runs every configured experiment, writes the CSV atomically and prints a
/// summary table to `log`. Throws AssertionFailure, ConfigError, PlaneError.
RunOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options, std::ostream& log);

/// Fixed-width table of rows for terminals.
std::string summary_table(std::span<const ResultRow> rows);

}  // namespace reflex::scenario
