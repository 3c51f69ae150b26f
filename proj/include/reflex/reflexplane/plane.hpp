#pragma once

#include "reflex/classifier/engine.hpp"
#include "reflex/classifier/shard.hpp"
#include "reflex/monitors/monitor.hpp"
#include "reflex/raftstate/cluster.hpp"
#include "reflex/simnet/simulator.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reflex::plane {

using monitor::ElementId;
using monitor::ReflexCommand;
using sim::VirtualTime;

/// Where monitors send their commands.
enum class CommandPath {
    Consensus,  ///< through the Raft leader, which forwards after commit
    Direct,     ///< straight to the target switch
};

struct PlaneConfig {
    VirtualTime link_latency = 43;
    VirtualTime switch_latency = 300;
    VirtualTime mac_serial_ns = 0;

    std::size_t classifiers = 1;
    classify::ShardMode shard_mode = classify::ShardMode::Replicate;
    /// Null means one catch-all rule sending every report to every monitor.
    std::shared_ptr<const classify::RuleSet> ruleset;
    classify::EngineConfig engine{};
    VirtualTime classifier_service_ns = 0;

    std::vector<monitor::MonitorSpec> monitors;
    VirtualTime monitor_service_ns = 0;

    std::size_t raft_replicas = 3;
    raft::ServiceProfile raft_service{};
    raft::RaftConfig raft{};

    /// Switches that commands may target, with the ports monitors may reroute to.
    std::map<ElementId, std::vector<std::uint32_t>> elements{{1, {1, 2, 3, 4}}};

    CommandPath command_path = CommandPath::Consensus;
    std::size_t rx_queue_capacity = 1024;
    std::uint64_t seed = 1;

    /// Stage service times and MAC/serial per the named bundle: "nanopu" or "zero".
    void apply_preset(std::string_view name);
};

/// Validation failure; `path` names the offending config field.
class PlaneError : public std::invalid_argument {
public:
    PlaneError(std::string path, const std::string& what)
        : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Provenance of one command, from the report that caused it to the switch.
struct ReflexTrace {
    std::uint64_t report_id = 0;
    std::uint64_t command_id = 0;
    VirtualTime report_ingress = 0;    ///< report reached the classifier NIC
    VirtualTime classify_done = 0;     ///< classifier finished
    VirtualTime monitor_ingress = 0;   ///< projected report reached the monitor NIC
    VirtualTime monitor_decision = 0;  ///< monitor emitted the command
    VirtualTime command_egress = 0;    ///< command left the monitor NIC
    std::optional<VirtualTime> raft_commit;  ///< leader applied it and handed it to its NIC
    std::optional<VirtualTime> update_egress;
    std::optional<VirtualTime> switch_arrival;  ///< update reached the switch NIC

    bool delivered() const noexcept { return switch_arrival.has_value(); }
    VirtualTime e2e() const { return switch_arrival.value() - report_ingress; }
    VirtualTime direct() const noexcept { return command_egress - monitor_ingress; }
    /// Stamps in chain order (absent ones skipped).
    std::vector<VirtualTime> chain() const;
    bool operator==(const ReflexTrace&) const = default;
};

struct RunReport {
    std::uint64_t reports_injected = 0;
    std::uint64_t reports_classified = 0;
    std::uint64_t reports_unmatched = 0;
    std::uint64_t reports_monitored = 0;
    std::vector<ReflexCommand> commands;
    std::vector<ReflexTrace> traces;
    /// Keyed by stage: "classify", "monitor", "direct", "e2e".
    std::map<std::string, sim::LatencyStats> stages;
    std::map<std::string, std::uint64_t> drops_per_node;
    std::uint64_t total_drops() const;
};

class Plane;

/// Shared bookkeeping the plane's node handlers write into.
struct PlaneRecorder {
    std::map<std::uint64_t, ReflexTrace> traces;  ///< by command id
    std::vector<ReflexCommand> commands;
    std::vector<VirtualTime> monitor_completions;
    std::uint64_t classified = 0;
    std::uint64_t unmatched = 0;
    std::uint64_t monitored = 0;
};

class Plane {
public:
    /// Validates and provisions every node. Throws PlaneError.
    static std::unique_ptr<Plane> build(PlaneConfig config);

    /// Runs until the Raft cluster has a leader (no-op in direct mode).
    void start();

    /// Feeds `reports` to the classifiers at `rate_rps`, starting `lead_ns` from
    /// now, then drains. Reports go round-robin to replicated classifiers, or by
    /// flow hash to partitioned ones.
    RunReport inject_reports(std::span<const telemetry::IntReport> reports, double rate_rps, VirtualTime lead_ns = 5'000,
                             VirtualTime drain_ns = 2'000'000);

    /// Control-plane interface: leader-local read and replicated write.
    raft::ElementState read_element_state(ElementId element) const;
    raft::CommitReceipt control_write(raft::ControlCommand cmd, VirtualTime timeout = 10'000'000);

    /// The switch's own view, built from the updates it has received.
    const raft::ElementState& switch_state(ElementId element) const;

    sim::Simulator& sim() noexcept { return *sim_; }
    const PlaneConfig& config() const noexcept { return config_; }
    const PlaneRecorder& recorder() const noexcept { return *recorder_; }
    std::optional<raft::ServerIndex> leader() const;
    const raft::RaftNode& raft_node(raft::ServerIndex i) const;
    std::size_t classifier_count() const noexcept { return classifier_nodes_.size(); }
    sim::NodeId classifier_node(std::size_t i) const { return classifier_nodes_.at(i); }
    sim::NodeId monitor_node(std::size_t i) const { return monitor_nodes_.at(i); }
    std::size_t monitor_count() const noexcept { return monitor_nodes_.size(); }

    /// JSON-lines dump of traces.
    void dump_traces(std::ostream& out) const;

private:
    explicit Plane(PlaneConfig config);

    PlaneConfig config_;
    std::unique_ptr<sim::Simulator> sim_;
    std::shared_ptr<PlaneRecorder> recorder_;
    std::shared_ptr<raft::RaftWiring> wiring_;
    std::vector<sim::NodeId> classifier_nodes_;
    std::vector<sim::NodeId> monitor_nodes_;
    std::vector<std::shared_ptr<sim::NodeHandler>> monitor_handlers_;
    std::vector<std::shared_ptr<raft::RaftServerHandler>> servers_;
    std::shared_ptr<raft::RaftClientHandler> control_;
    std::map<ElementId, std::shared_ptr<sim::NodeHandler>> switches_;
    std::uint64_t next_report_id_ = 1;
};

/// Expected e2e latency of an uncontended command through the full chain.
VirtualTime analytic_e2e_latency(const PlaneConfig& config);

}  // namespace reflex::plane
