#pragma once

#include "reflex/monitors/command.hpp"
#include "reflex/telemetry/int_report.hpp"

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reflex::scenario {

/// Round-robin stream over `flows` flows on a two-switch path, with hop
/// latencies base + uniform[0, jitter]. One hop of one report gets `spike_ns`
/// added. Jitter must stay well under the detector threshold so the spike is
/// the only thing that fires.
struct AnomalyTraceParams {
    std::size_t flows = 20;
    std::size_t reports_per_flow = 30;
    std::size_t spike_flow = 7;
    std::size_t spike_report = 20;  ///< per-flow index; must be >= 10 so the window is full
    std::size_t spike_hop = 1;      ///< > 0 so the reroute lands on an upstream switch
    sim::VirtualTime base_latency_ns = 1000;
    sim::VirtualTime jitter_ns = 40;
    sim::VirtualTime spike_ns = 3000;
    std::uint64_t seed = 1;
};

/// What the planted anomaly should make a path-latency monitor emit.
struct PlantedSpike {
    std::size_t report_index = 0;
    telemetry::FlowKey flow;
    monitor::ElementId at_switch = 0;
    std::uint32_t new_egress_port = 0;

    bool operator==(const PlantedSpike&) const = default;
};

struct AnomalyTrace {
    std::vector<telemetry::IntReport> reports;
    std::vector<PlantedSpike> spikes;
};

using ElementPorts = std::map<monitor::ElementId, std::vector<std::uint32_t>>;

/// The default topology the fixtures assume: switches 1 and 2, ports 1-4.
ElementPorts default_element_ports();

/// Builds the stream and its ground truth. The truth follows from the
/// construction: reroute at the switch before the spiked hop, to the
/// smallest other port there.
AnomalyTrace make_anomaly_trace(const AnomalyTraceParams& params, const ElementPorts& ports = default_element_ports());

std::string format_truth(std::span<const PlantedSpike> spikes);
std::vector<PlantedSpike> parse_truth(const std::string& text);
std::vector<PlantedSpike> read_truth_file(const std::string& path);

/// Reroute commands reduced to the truth shape, for comparison.
std::vector<PlantedSpike> observed_spikes(std::span<const monitor::ReflexCommand> commands,
                                          std::span<const std::size_t> report_index_of_command);

/// Default scenario files as (file name, YAML text). Paths inside them are
/// relative to the directory they are written into.
std::vector<std::pair<std::string, std::string>> default_scenarios();

/// Writes acl_100.rules, trace_anomaly1.int, trace_anomaly1.truth.json and the
/// default scenarios. Byte-identical for the same seed. Returns the files
/// written. Throws std::runtime_error on IO failure.
std::vector<std::string> write_fixtures(const std::string& out_dir, std::uint64_t seed = 1);

}  // namespace reflex::scenario
