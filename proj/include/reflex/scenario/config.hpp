#pragma once

#include "reflex/monitors/monitor.hpp"
#include "reflex/raftstate/cluster.hpp"
#include "reflex/reflexplane/plane.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reflex::scenario {

using sim::VirtualTime;

/// Config problem. `path` is the dotted key (e.g. "raft.replicas"); `line` is
/// 1-based, or 0 when the key is absent from the document.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, std::size_t line, const std::string& what);

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

enum class Experiment { RaftLatency, RaftSweep, Classify, Monitor, EndToEnd, Direct, Bottleneck, Capacity };

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);

enum class EngineKind { Linear, Tree, Learned };

std::string_view to_string(EngineKind e);
std::optional<EngineKind> parse_engine_kind(std::string_view name);

struct TopologyConfig {
    VirtualTime link_latency_ns = 43;
    VirtualTime switch_latency_ns = 300;
    std::optional<VirtualTime> mac_serial_ns;  ///< overrides the plane preset
};

struct RaftScenario {
    std::size_t replicas = 3;
    VirtualTime link_latency_ns = 43;
    VirtualTime switch_latency_ns = 1;
    VirtualTime mac_serial_ns = 0;
    raft::ServiceProfile service = raft::ServiceProfile::calibrated();
    std::size_t requests = 1000;           ///< isolated writes for raft_latency
    VirtualTime idle_gap_ns = 20'000;      ///< pause before each isolated write
    std::size_t rx_queue_capacity = 1024;
};

struct PlaneScenario {
    std::string preset = "nanopu";
    std::size_t classifiers = 1;
    classify::ShardMode shard_mode = classify::ShardMode::Replicate;
    std::optional<VirtualTime> classifier_service_ns;  ///< overrides the preset
    std::optional<VirtualTime> monitor_service_ns;
    std::map<monitor::ElementId, std::vector<std::uint32_t>> elements{{1, {1, 2, 3, 4}}, {2, {1, 2, 3, 4}}};
    std::size_t rx_queue_capacity = 1024;
};

struct ClassifyScenario {
    EngineKind engine = EngineKind::Tree;
    std::size_t synth_rules = 100;  ///< used when no ruleset file is given
    std::size_t keys = 10'000;
};

struct BottleneckScenario {
    std::vector<VirtualTime> classifier_service_ns{20, 50, 100, 200, 500};
    VirtualTime monitor_service_ns = 50;
    std::size_t reports = 2000;
};

struct WorkloadConfig {
    std::vector<double> rates_rps{318'000, 400'000, 450'000, 480'000, 500'000, 507'000, 510'000};
    std::size_t requests = 10'000;             ///< per sweep point
    std::optional<VirtualTime> duration_ns;    ///< if set, requests = duration * rate per point
    double report_rate_rps = 500'000;          ///< plane experiments
};

struct OutputConfig {
    std::string dir = "out";
    std::string csv = "results.csv";
    bool trace_dump = false;
};

struct ScenarioConfig {
    std::string name;
    std::uint64_t seed = 1;
    std::vector<Experiment> experiments;
    TopologyConfig topology;
    std::optional<std::string> ruleset_path;  ///< resolved against the config file directory
    std::optional<std::string> trace_path;
    std::optional<std::string> truth_path;
    std::vector<monitor::MonitorSpec> monitors;
    RaftScenario raft;
    PlaneScenario plane;
    ClassifyScenario classify;
    BottleneckScenario bottleneck;
    WorkloadConfig workload;
    OutputConfig output;

    /// The plane configuration the end-to-end style experiments start from.
    plane::PlaneConfig plane_config() const;
    raft::ClusterConfig cluster_config() const;
};

/// Parses YAML text. `base_dir` resolves relative file paths. Each override is
/// `dotted.key=value`, applied before validation. Unknown keys are rejected.
/// Throws ConfigError.
ScenarioConfig parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace reflex::scenario
