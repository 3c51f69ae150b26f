#pragma once

#include "reflex/simnet/rng.hpp"
#include "reflex/simnet/stats.hpp"
#include "reflex/simnet/topology.hpp"
#include "reflex/simnet/types.hpp"

#include <any>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace reflex::sim {

/// Raised when a handler breaks a kernel contract (e.g. schedules into the past).
class SimLogicError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct ServiceTime {
    enum class Kind { Constant, Exponential };

    Kind kind = Kind::Constant;
    VirtualTime mean = 0;

    static ServiceTime constant(VirtualTime v) { return {Kind::Constant, v}; }
    static ServiceTime exponential(VirtualTime mean) { return {Kind::Exponential, mean}; }

    VirtualTime sample(CounterRng& rng) const {
        return kind == Kind::Constant ? mean : rng.exponential(mean);
    }
};

struct NodeConfig {
    ServiceTime service = ServiceTime::constant(0);
    /// Maximum messages held by the node, including the one in service.
    std::size_t rx_queue_capacity = 1024;
};

struct Packet {
    std::uint64_t id = 0;
    NodeId src;
    NodeId dst;
    std::uint32_t size_bytes = 0;
    std::any payload;
    VirtualTime sent_at = 0;         ///< handler emitted it
    VirtualTime nic_egress_at = 0;   ///< left the sender's NIC
    VirtualTime nic_ingress_at = 0;  ///< reached the receiver's NIC
    VirtualTime enqueued_at = 0;     ///< after MAC/serial, entered the rx queue
    VirtualTime service_start = 0;

    template <class T>
    const T* as() const noexcept {
        return std::any_cast<T>(&payload);
    }
};

struct SendReceipt {
    std::uint64_t packet_id = 0;
    VirtualTime nic_egress_at = 0;
    VirtualTime nic_ingress_at = 0;
};

class Simulator;

/// Handle given to node handlers while they run.
class Context {
public:
    Context(Simulator& sim, NodeId self) : sim_(sim), self_(self) {}

    VirtualTime now() const;
    NodeId self() const noexcept { return self_; }
    const Topology& topology() const;
    SendReceipt send(NodeId dst, std::any payload, std::uint32_t size_bytes);
    void set_timer(VirtualTime at, std::uint64_t token);
    CounterRng& rng();
    StatsSink& stats();
    Simulator& simulator() noexcept { return sim_; }

private:
    Simulator& sim_;
    NodeId self_;
};

class NodeHandler {
public:
    virtual ~NodeHandler() = default;

    /// Called when `pkt` finishes service at this node.
    virtual void on_packet(Context& ctx, const Packet& pkt) = 0;
    virtual void on_timer(Context& /*ctx*/, std::uint64_t /*token*/) {}
    /// Per-message service time override; nullopt uses the node's distribution.
    virtual std::optional<VirtualTime> service_time(const Packet& /*pkt*/) const { return std::nullopt; }
};

enum class EventKind : std::uint8_t { Arrival, ServiceDone, Timer };

struct TraceRecord {
    VirtualTime at = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Arrival;
    NodeId node;
    std::uint64_t ref = 0;  ///< packet id or timer token

    bool operator==(const TraceRecord&) const = default;
};

struct NodeCounters {
    std::uint64_t arrived = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::size_t max_occupancy = 0;
};

struct SimSummary {
    std::uint64_t events = 0;
    VirtualTime final_time = 0;
    std::uint64_t injected = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
    std::vector<std::uint64_t> drops_per_node;
    std::uint64_t trace_digest = 0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    /// Uniform extra wire delay in [0, link_jitter_ns] per message; 0 disables.
    VirtualTime link_jitter_ns = 0;
    bool record_trace = false;
};

/// Single-threaded discrete-event kernel. Events fire in (time, seq) order;
/// seq is the insertion counter, so equal-time events run FIFO.
class Simulator {
public:
    Simulator(std::shared_ptr<const Topology> topology, SimConfig config = {});
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    const Topology& topology() const noexcept { return *topology_; }
    VirtualTime now() const noexcept { return now_; }

    void attach(NodeId node, std::shared_ptr<NodeHandler> handler, NodeConfig config = {});
    NodeHandler* handler(NodeId node) const;
    const NodeConfig& config(NodeId node) const { return nodes_.at(node.value).config; }

    /// Delivers an externally generated message to `dst`'s NIC at time `at`.
    std::uint64_t inject(NodeId dst, std::any payload, std::uint32_t size_bytes, VirtualTime at);
    SendReceipt send(NodeId src, NodeId dst, std::any payload, std::uint32_t size_bytes);
    void set_timer(NodeId node, VirtualTime at, std::uint64_t token);

    /// A crashed node drops everything it holds or receives and ignores its timers.
    void crash(NodeId node);
    void restart(NodeId node);
    bool is_up(NodeId node) const { return nodes_.at(node.value).up; }

    /// Processes the next event; returns false when the queue is empty.
    bool step();
    std::optional<VirtualTime> next_event_time() const;
    SimSummary run_until(VirtualTime t_end);
    /// Runs until `done()` holds or no events remain at or before `t_end`.
    SimSummary run_until(VirtualTime t_end, const std::function<bool()>& done);

    void set_observer(std::function<void(const TraceRecord&)> observer) { observer_ = std::move(observer); }

    const NodeCounters& counters(NodeId node) const { return nodes_.at(node.value).counters; }
    std::size_t occupancy(NodeId node) const;
    StatsSink& stats() noexcept { return stats_; }
    const StatsSink& stats() const noexcept { return stats_; }
    CounterRng& node_rng(NodeId node) { return nodes_.at(node.value).rng; }

    const std::vector<TraceRecord>& trace() const noexcept { return trace_; }
    std::uint64_t trace_digest() const noexcept { return digest_; }
    SimSummary summary() const;

private:
    struct Event {
        VirtualTime at;
        std::uint64_t seq;
        EventKind kind;
        NodeId node;
        std::uint64_t ref;
        std::uint64_t epoch;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };
    struct NodeRuntime {
        std::shared_ptr<NodeHandler> handler;
        NodeConfig config;
        std::deque<std::uint64_t> queue;
        bool busy = false;
        std::uint64_t in_service = 0;
        bool up = true;
        std::uint64_t epoch = 0;
        NodeCounters counters;
        CounterRng rng;
    };

    void push(VirtualTime at, EventKind kind, NodeId node, std::uint64_t ref);
    void on_arrival(const Event& ev);
    void on_service_done(const Event& ev);
    void on_timer(const Event& ev);
    void start_service(NodeRuntime& rt, NodeId node, std::uint64_t packet_id);
    void drop(NodeRuntime& rt, std::uint64_t packet_id);
    SendReceipt dispatch(Packet pkt, VirtualTime depart);

    std::shared_ptr<const Topology> topology_;
    SimConfig config_;
    std::vector<NodeRuntime> nodes_;
    std::priority_queue<Event, std::vector<Event>, Later> events_;
    std::unordered_map<std::uint64_t, Packet> packets_;
    VirtualTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_packet_ = 1;
    std::uint64_t processed_ = 0;
    std::uint64_t injected_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t dropped_ = 0;
    CounterRng jitter_rng_;
    StatsSink stats_;
    std::vector<TraceRecord> trace_;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
    std::function<void(const TraceRecord&)> observer_;
};

}  // namespace reflex::sim
