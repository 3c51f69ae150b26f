#pragma once

#include "reflex/raftstate/raft_node.hpp"
#include "reflex/simnet/simulator.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace reflex::raft {

/// What travels between Raft participants in the simulator.
struct RaftWire {
    Destination from;
    RaftMessage msg;
};

std::uint32_t wire_size(const RaftMessage& msg);

/// Per-message service times at Raft servers, keyed by message kind.
struct ServiceProfile {
    VirtualTime client_write = 0;    ///< leader, per ClientWrite
    VirtualTime append_entries = 0;  ///< follower, per AppendEntries
    VirtualTime append_reply = 0;    ///< leader, per AppendReply
    VirtualTime other = 0;           ///< votes and everything else
    bool exponential = false;        ///< sample with the values as means

    static ServiceProfile zero() { return {}; }
    /// Calibrated so that one uncontended write spends 1532 ns in service on
    /// its critical path (leader 1000, follower 32, leader 500) and the leader
    /// spends 2000 ns per write with two followers.
    static ServiceProfile calibrated() { return {1000, 32, 500, 0, false}; }
    VirtualTime critical_path() const noexcept { return client_write + append_entries + append_reply; }
};

/// Where each participant lives in the simulator.
struct RaftWiring {
    std::vector<sim::NodeId> servers;
    std::map<std::uint64_t, sim::NodeId> clients;
    std::map<ElementId, sim::NodeId> elements;

    std::optional<sim::NodeId> resolve(const Destination& d) const;
};

class RaftServerHandler;

/// Called after each apply batch on a server, with the entries just applied.
using ApplyObserver = std::function<void(ServerIndex, const std::vector<AppliedEntry>&)>;

/// Hosts a RaftNode on a simulator node: feeds it messages and ticks, sends
/// its output, and charges service time per message kind.
class RaftServerHandler : public sim::NodeHandler {
public:
    RaftServerHandler(ServerIndex index, std::shared_ptr<const RaftWiring> wiring, RaftConfig config,
                      ServiceProfile service, std::uint64_t seed, std::set<ElementId> elements);

    void on_packet(sim::Context& ctx, const sim::Packet& pkt) override;
    void on_timer(sim::Context& ctx, std::uint64_t token) override;
    std::optional<VirtualTime> service_time(const sim::Packet& pkt) const override;

    /// Schedules the first tick; call once after attaching.
    void arm(sim::Simulator& sim);
    /// Keeps the persisted state; the simulator drops the node's traffic.
    void crash();
    /// Rebuilds the node from its persisted state and re-arms it.
    void restart(sim::Simulator& sim);

    const RaftNode& node() const noexcept { return node_; }
    ServerIndex index() const noexcept { return index_; }
    std::uint32_t incarnation() const noexcept { return incarnation_; }
    void set_apply_observer(ApplyObserver obs) { observer_ = std::move(obs); }
    /// Sends that could not be routed (e.g. to an unwired element).
    std::uint64_t unrouted() const noexcept { return unrouted_; }

private:
    void emit(sim::Simulator& sim, std::vector<Outbound> out);
    void after_step(sim::Simulator& sim, std::vector<Outbound> out);
    void reschedule(sim::Simulator& sim);
    std::uint64_t node_seed() const;

    ServerIndex index_;
    std::shared_ptr<const RaftWiring> wiring_;
    RaftConfig config_;
    ServiceProfile service_;
    std::uint64_t seed_;
    std::set<ElementId> elements_;
    RaftNode node_;
    mutable sim::CounterRng service_rng_;
    std::uint64_t generation_ = 0;
    VirtualTime scheduled_at_ = sim::kNever;
    std::uint32_t incarnation_ = 0;
    std::optional<PersistentState> persisted_;
    ApplyObserver observer_;
    std::uint64_t unrouted_ = 0;
};

struct CompletedWrite {
    std::uint64_t request_id = 0;
    VirtualTime sent_at = 0;
    VirtualTime replied_at = 0;
    std::uint64_t index = 0;
    VirtualTime latency() const noexcept { return replied_at - sent_at; }
};

/// A Raft client. Writes go to the last known leader; redirects and
/// (optionally) timeouts move on to another server with the same request id.
class RaftClientHandler : public sim::NodeHandler {
public:
    struct Options {
        bool retries = true;
        VirtualTime retry_timeout = 500'000;
        std::string stats_label = "raft.write";
    };

    RaftClientHandler(std::uint64_t client_id, sim::NodeId self, std::shared_ptr<const RaftWiring> wiring,
                      Options options);

    void on_packet(sim::Context& ctx, const sim::Packet& pkt) override;
    void on_timer(sim::Context& ctx, std::uint64_t token) override;

    /// Sends a new request now; returns its id.
    std::uint64_t submit(sim::Simulator& sim, Payload payload);
    /// Schedules `count` requests `interval` apart starting at `start`;
    /// `make(k)` builds the k-th payload.
    void schedule_open_loop(sim::Simulator& sim, VirtualTime start, VirtualTime interval, std::size_t count,
                            std::function<Payload(std::size_t)> make);

    void set_leader_hint(ServerIndex s) noexcept { hint_ = s; }
    std::uint64_t client_id() const noexcept { return client_id_; }
    const std::map<std::uint64_t, CompletedWrite>& completed() const noexcept { return completed_; }
    const std::map<std::uint64_t, std::string>& rejected() const noexcept { return rejected_; }
    std::size_t pending() const noexcept { return pending_.size(); }
    std::uint64_t issued() const noexcept { return next_request_ - 1; }
    std::uint64_t resends() const noexcept { return resends_; }

private:
    struct Pending {
        Payload payload;
        VirtualTime first_sent = 0;
        VirtualTime last_sent = 0;
        std::uint64_t attempts = 0;
    };
    void send(sim::Simulator& sim, std::uint64_t request_id);

    std::uint64_t client_id_;
    sim::NodeId self_;
    std::shared_ptr<const RaftWiring> wiring_;
    Options options_;
    ServerIndex hint_ = 0;
    std::uint64_t next_request_ = 1;
    std::map<std::uint64_t, Pending> pending_;
    std::map<std::uint64_t, CompletedWrite> completed_;
    std::map<std::uint64_t, std::string> rejected_;
    std::vector<std::function<Payload(std::size_t)>> generators_;
    std::uint64_t resends_ = 0;
};

struct ReceivedUpdate {
    std::uint64_t index = 0;
    Payload payload;
    VirtualTime sent_at = 0;     ///< leader handed it to its NIC
    VirtualTime egress_at = 0;   ///< left the leader's NIC
    VirtualTime arrived_at = 0;  ///< reached this switch's NIC
};

/// A network element receiving committed updates from the leader.
class ElementSwitchHandler : public sim::NodeHandler {
public:
    explicit ElementSwitchHandler(ElementId id) { state_.element_id = id; }

    void on_packet(sim::Context& ctx, const sim::Packet& pkt) override;

    const std::vector<ReceivedUpdate>& updates() const noexcept { return updates_; }
    /// The switch's own view, built from the updates it received.
    const ElementState& state() const noexcept { return state_; }

private:
    std::vector<ReceivedUpdate> updates_;
    ElementState state_;
};

struct ClusterConfig {
    std::size_t replicas = 3;
    std::size_t clients = 1;
    std::vector<ElementId> elements{1};
    VirtualTime link_latency = 43;
    VirtualTime switch_latency = 1;
    VirtualTime mac_serial_ns = 0;
    VirtualTime link_jitter_ns = 0;
    std::size_t rx_queue_capacity = 1024;
    ServiceProfile service{};
    RaftConfig raft{};
    std::uint64_t seed = 1;
    bool client_retries = true;
    VirtualTime client_retry_timeout = 500'000;
    bool record_trace = false;
};

struct CommitReceipt {
    VirtualTime latency = 0;
    std::uint64_t request_id = 0;
    std::uint64_t index = 0;
};

/// A self-contained simulated deployment: clients, Raft servers and element
/// switches around one fabric switch.
class RaftCluster {
public:
    explicit RaftCluster(ClusterConfig config);

    sim::Simulator& sim() noexcept { return *sim_; }
    const ClusterConfig& config() const noexcept { return config_; }
    std::size_t size() const noexcept { return servers_.size(); }
    const RaftNode& node(ServerIndex i) const { return servers_.at(i)->node(); }
    RaftServerHandler& server(ServerIndex i) { return *servers_.at(i); }
    RaftClientHandler& client(std::size_t i = 0) { return *clients_.at(i); }
    ElementSwitchHandler& element(ElementId e) { return *elements_.at(e); }
    const RaftWiring& wiring() const noexcept { return *wiring_; }
    bool is_up(ServerIndex i) const { return sim_->is_up(wiring_->servers.at(i)); }

    /// Live leader with the highest term, if any.
    std::optional<ServerIndex> leader() const;
    /// Runs until a leader has committed an entry of its own term. Throws Timeout.
    ServerIndex wait_for_leader(VirtualTime timeout = 5'000'000);

    /// Blocking write through client `client`. Throws InvalidPayload for
    /// malformed payloads (before anything is sent) and Timeout.
    CommitReceipt client_write(Payload payload, std::size_t client = 0, VirtualTime timeout = 10'000'000);
    /// Control-plane write. Throws UnknownElement for targets not in the cluster.
    CommitReceipt control_write(ControlCommand cmd, VirtualTime timeout = 10'000'000);
    /// Leader-local read of applied state. Throws NoLeader or UnknownElement.
    ElementState read_element_state(ElementId element) const;

    void crash(ServerIndex i);
    void restart(ServerIndex i);
    void run_for(VirtualTime duration);

    /// JSON-lines snapshot of every server, one object per line.
    void dump_state(std::ostream& out) const;

private:
    ClusterConfig config_;
    std::shared_ptr<RaftWiring> wiring_;
    std::unique_ptr<sim::Simulator> sim_;
    std::vector<std::shared_ptr<RaftServerHandler>> servers_;
    std::vector<std::shared_ptr<RaftClientHandler>> clients_;
    std::map<ElementId, std::shared_ptr<ElementSwitchHandler>> elements_;
};

/// Analytic uncontended write latency on a star: four traversals plus the
/// service on the critical path. MAC/serial is charged at both ends of each traversal.
VirtualTime analytic_write_latency(VirtualTime link_latency, VirtualTime switch_latency, VirtualTime mac_serial_ns,
                                   const ServiceProfile& service);

}  // namespace reflex::raft
