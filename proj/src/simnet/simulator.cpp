#include "reflex/simnet/simulator.hpp"

#include <string>

namespace reflex::sim {

VirtualTime Context::now() const { return sim_.now(); }
const Topology& Context::topology() const { return sim_.topology(); }
SendReceipt Context::send(NodeId dst, std::any payload, std::uint32_t size_bytes) {
    return sim_.send(self_, dst, std::move(payload), size_bytes);
}
void Context::set_timer(VirtualTime at, std::uint64_t token) { sim_.set_timer(self_, at, token); }
CounterRng& Context::rng() { return sim_.node_rng(self_); }
StatsSink& Context::stats() { return sim_.stats(); }

Simulator::Simulator(std::shared_ptr<const Topology> topology, SimConfig config)
    : topology_(std::move(topology)), config_(config), jitter_rng_(CounterRng::named(config.seed, "simnet/jitter")) {
    nodes_.resize(topology_->node_count());
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
        nodes_[i].rng = CounterRng::named(config_.seed, "simnet/node/" + topology_->node(NodeId{i}).name);
    }
}

void Simulator::attach(NodeId node, std::shared_ptr<NodeHandler> handler, NodeConfig config) {
    if (config.rx_queue_capacity == 0) {
        throw std::invalid_argument("rx_queue_capacity must be >= 1");
    }
    auto& rt = nodes_.at(node.value);
    rt.handler = std::move(handler);
    rt.config = config;
}

NodeHandler* Simulator::handler(NodeId node) const { return nodes_.at(node.value).handler.get(); }

void Simulator::push(VirtualTime at, EventKind kind, NodeId node, std::uint64_t ref) {
    if (at < now_) {
        throw SimLogicError("event scheduled in the past: " + std::to_string(at) + " < " + std::to_string(now_));
    }
    events_.push(Event{at, next_seq_++, kind, node, ref, nodes_.at(node.value).epoch});
}

std::uint64_t Simulator::inject(NodeId dst, std::any payload, std::uint32_t size_bytes, VirtualTime at) {
    if (at < now_) {
        throw SimLogicError("inject into the past");
    }
    Packet pkt;
    pkt.id = next_packet_++;
    pkt.src = dst;
    pkt.dst = dst;
    pkt.size_bytes = size_bytes;
    pkt.payload = std::move(payload);
    pkt.sent_at = at;
    pkt.nic_egress_at = at;
    pkt.nic_ingress_at = at;
    pkt.enqueued_at = at + topology_->node(dst).mac_serial_ns;
    const std::uint64_t id = pkt.id;
    const VirtualTime enqueue = pkt.enqueued_at;
    packets_.emplace(id, std::move(pkt));
    ++injected_;
    push(enqueue, EventKind::Arrival, dst, id);
    return id;
}

SendReceipt Simulator::send(NodeId src, NodeId dst, std::any payload, std::uint32_t size_bytes) {
    Packet pkt;
    pkt.id = next_packet_++;
    pkt.src = src;
    pkt.dst = dst;
    pkt.size_bytes = size_bytes;
    pkt.payload = std::move(payload);
    pkt.sent_at = now_;
    return dispatch(std::move(pkt), now_);
}

SendReceipt Simulator::dispatch(Packet pkt, VirtualTime depart) {
    const auto& topo = *topology_;
    VirtualTime wire = topo.transit(pkt.src, pkt.dst, pkt.size_bytes);
    if (config_.link_jitter_ns > 0) {
        wire += jitter_rng_.uniform(0, config_.link_jitter_ns);
    }
    pkt.nic_egress_at = depart + topo.node(pkt.src).mac_serial_ns;
    pkt.nic_ingress_at = pkt.nic_egress_at + wire;
    pkt.enqueued_at = pkt.nic_ingress_at + topo.node(pkt.dst).mac_serial_ns;
    SendReceipt receipt{pkt.id, pkt.nic_egress_at, pkt.nic_ingress_at};
    const std::uint64_t id = pkt.id;
    const VirtualTime enqueue = pkt.enqueued_at;
    const NodeId dst = pkt.dst;
    packets_.emplace(id, std::move(pkt));
    ++injected_;
    push(enqueue, EventKind::Arrival, dst, id);
    return receipt;
}

void Simulator::set_timer(NodeId node, VirtualTime at, std::uint64_t token) {
    push(at, EventKind::Timer, node, token);
}

void Simulator::crash(NodeId node) {
    auto& rt = nodes_.at(node.value);
    if (!rt.up) {
        return;
    }
    rt.up = false;
    ++rt.epoch;
    if (rt.busy) {
        drop(rt, rt.in_service);
        rt.busy = false;
    }
    while (!rt.queue.empty()) {
        drop(rt, rt.queue.front());
        rt.queue.pop_front();
    }
}

void Simulator::restart(NodeId node) {
    auto& rt = nodes_.at(node.value);
    rt.up = true;
    ++rt.epoch;
}

std::size_t Simulator::occupancy(NodeId node) const {
    const auto& rt = nodes_.at(node.value);
    return rt.queue.size() + (rt.busy ? 1 : 0);
}

void Simulator::drop(NodeRuntime& rt, std::uint64_t packet_id) {
    packets_.erase(packet_id);
    ++rt.counters.dropped;
    ++dropped_;
}

void Simulator::start_service(NodeRuntime& rt, NodeId node, std::uint64_t packet_id) {
    Packet& pkt = packets_.at(packet_id);
    pkt.service_start = now_;
    rt.busy = true;
    rt.in_service = packet_id;
    std::optional<VirtualTime> duration;
    if (rt.handler) {
        duration = rt.handler->service_time(pkt);
    }
    const VirtualTime d = duration ? *duration : rt.config.service.sample(rt.rng);
    push(now_ + d, EventKind::ServiceDone, node, packet_id);
}

void Simulator::on_arrival(const Event& ev) {
    auto& rt = nodes_[ev.node.value];
    ++rt.counters.arrived;
    if (!rt.up) {
        drop(rt, ev.ref);
        return;
    }
    const std::size_t occ = rt.queue.size() + (rt.busy ? 1 : 0);
    if (occ >= rt.config.rx_queue_capacity) {
        drop(rt, ev.ref);
        return;
    }
    if (!rt.busy) {
        start_service(rt, ev.node, ev.ref);
    } else {
        rt.queue.push_back(ev.ref);
    }
    rt.counters.max_occupancy = std::max(rt.counters.max_occupancy, occ + 1);
}

void Simulator::on_service_done(const Event& ev) {
    auto& rt = nodes_[ev.node.value];
    if (ev.epoch != rt.epoch || !rt.busy || rt.in_service != ev.ref) {
        return;  // service was aborted by a crash
    }
    auto node = packets_.extract(ev.ref);
    rt.busy = false;
    ++rt.counters.delivered;
    ++delivered_;
    if (rt.handler) {
        Context ctx(*this, ev.node);
        rt.handler->on_packet(ctx, node.mapped());
    }
    // The handler may have crashed this node.
    if (rt.up && !rt.busy && !rt.queue.empty()) {
        const std::uint64_t next = rt.queue.front();
        rt.queue.pop_front();
        start_service(rt, ev.node, next);
    }
}

void Simulator::on_timer(const Event& ev) {
    auto& rt = nodes_[ev.node.value];
    if (ev.epoch != rt.epoch || !rt.up || !rt.handler) {
        return;
    }
    Context ctx(*this, ev.node);
    rt.handler->on_timer(ctx, ev.ref);
}

std::optional<VirtualTime> Simulator::next_event_time() const {
    if (events_.empty()) {
        return std::nullopt;
    }
    return events_.top().at;
}

bool Simulator::step() {
    if (events_.empty()) {
        return false;
    }
    const Event ev = events_.top();
    events_.pop();
    now_ = ev.at;
    ++processed_;
    const TraceRecord rec{ev.at, ev.seq, ev.kind, ev.node, ev.ref};
    digest_ ^= splitmix64(rec.at ^ splitmix64(rec.seq ^ (static_cast<std::uint64_t>(rec.kind) << 56) ^
                                              (static_cast<std::uint64_t>(rec.node.value) << 32) ^ rec.ref));
    digest_ *= 0x100000001b3ULL;
    if (config_.record_trace) {
        trace_.push_back(rec);
    }
    switch (ev.kind) {
        case EventKind::Arrival:
            on_arrival(ev);
            break;
        case EventKind::ServiceDone:
            on_service_done(ev);
            break;
        case EventKind::Timer:
            on_timer(ev);
            break;
    }
    if (observer_) {
        observer_(rec);
    }
    return true;
}

SimSummary Simulator::run_until(VirtualTime t_end) {
    return run_until(t_end, [] { return false; });
}

SimSummary Simulator::run_until(VirtualTime t_end, const std::function<bool()>& done) {
    const std::uint64_t start = processed_;
    while (!events_.empty() && events_.top().at <= t_end && !done()) {
        step();
    }
    SimSummary s = summary();
    s.events = processed_ - start;
    return s;
}

SimSummary Simulator::summary() const {
    SimSummary s;
    s.events = processed_;
    s.final_time = now_;
    s.injected = injected_;
    s.delivered = delivered_;
    s.dropped = dropped_;
    s.in_flight = packets_.size();
    s.trace_digest = digest_;
    s.drops_per_node.reserve(nodes_.size());
    for (const auto& rt : nodes_) {
        s.drops_per_node.push_back(rt.counters.dropped);
    }
    return s;
}

}  // namespace reflex::sim
