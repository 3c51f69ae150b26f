#include "reflex/raftstate/cluster.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <ostream>

namespace reflex::raft {

using sim::NodeId;
using sim::Simulator;

namespace {

constexpr std::uint64_t kArrivalFlag = 1ULL << 63;
constexpr unsigned kGeneratorShift = 40;

}  // namespace

std::uint32_t wire_size(const RaftMessage& msg) {
    constexpr std::uint32_t kHeader = 64;
    if (const auto* ae = std::get_if<AppendEntries>(&msg)) {
        std::uint32_t n = kHeader;
        for (const auto& e : ae->entries) {
            n += 32 + wire_size(e.payload);
        }
        return n;
    }
    if (const auto* cw = std::get_if<ClientWrite>(&msg)) {
        return kHeader + wire_size(cw->payload);
    }
    if (const auto* su = std::get_if<SwitchUpdate>(&msg)) {
        return kHeader + wire_size(su->payload);
    }
    return kHeader;
}

std::optional<NodeId> RaftWiring::resolve(const Destination& d) const {
    switch (d.kind) {
        case Destination::Kind::Server:
            if (d.id < servers.size()) return servers[d.id];
            break;
        case Destination::Kind::Client:
            if (auto it = clients.find(d.id); it != clients.end()) return it->second;
            break;
        case Destination::Kind::Element:
            if (auto it = elements.find(static_cast<ElementId>(d.id)); it != elements.end()) return it->second;
            break;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

RaftServerHandler::RaftServerHandler(ServerIndex index, std::shared_ptr<const RaftWiring> wiring, RaftConfig config,
                                     ServiceProfile service, std::uint64_t seed, std::set<ElementId> elements)
    : index_(index),
      wiring_(std::move(wiring)),
      config_(config),
      service_(service),
      seed_(seed),
      elements_(std::move(elements)),
      node_(index, wiring_->servers.size(), config, sim::derive_seed(seed, "raft/server/" + std::to_string(index) + "/0"),
            elements_, 0),
      service_rng_(sim::CounterRng::named(seed, "raft/service/" + std::to_string(index))) {}

std::uint64_t RaftServerHandler::node_seed() const {
    return sim::derive_seed(seed_, "raft/server/" + std::to_string(index_) + "/" + std::to_string(incarnation_));
}

std::optional<VirtualTime> RaftServerHandler::service_time(const sim::Packet& pkt) const {
    const auto* wire = pkt.as<RaftWire>();
    if (wire == nullptr) {
        return VirtualTime{0};
    }
    VirtualTime mean = service_.other;
    if (std::holds_alternative<ClientWrite>(wire->msg)) {
        mean = service_.client_write;
    } else if (std::holds_alternative<AppendEntries>(wire->msg)) {
        mean = service_.append_entries;
    } else if (std::holds_alternative<AppendReply>(wire->msg)) {
        mean = service_.append_reply;
    }
    if (service_.exponential && mean > 0) {
        return service_rng_.exponential(mean);
    }
    return mean;
}

void RaftServerHandler::on_packet(sim::Context& ctx, const sim::Packet& pkt) {
    const auto* wire = pkt.as<RaftWire>();
    if (wire == nullptr) {
        return;
    }
    after_step(ctx.simulator(), node_.handle(wire->from, wire->msg, ctx.now()));
}

void RaftServerHandler::on_timer(sim::Context& ctx, std::uint64_t token) {
    if (token != generation_) {
        return;
    }
    scheduled_at_ = sim::kNever;
    after_step(ctx.simulator(), node_.tick(ctx.now()));
}

void RaftServerHandler::after_step(Simulator& sim, std::vector<Outbound> out) {
    ApplyResult applied = node_.apply_committed();
    out.insert(out.end(), std::make_move_iterator(applied.outbound.begin()),
               std::make_move_iterator(applied.outbound.end()));
    emit(sim, std::move(out));
    if (observer_ && !applied.applied.empty()) {
        observer_(index_, applied.applied);
    }
    reschedule(sim);
}

void RaftServerHandler::emit(Simulator& sim, std::vector<Outbound> out) {
    const NodeId self = wiring_->servers.at(index_);
    for (auto& o : out) {
        auto dst = wiring_->resolve(o.to);
        if (!dst) {
            ++unrouted_;
            continue;
        }
        const std::uint32_t size = wire_size(o.msg);
        sim.send(self, *dst, RaftWire{{Destination::Kind::Server, index_}, std::move(o.msg)}, size);
    }
}

void RaftServerHandler::reschedule(Simulator& sim) {
    const VirtualTime deadline = node_.next_deadline();
    if (deadline == sim::kNever) {
        return;
    }
    const VirtualTime at = std::max(deadline, sim.now());
    if (at == scheduled_at_) {
        return;
    }
    ++generation_;
    scheduled_at_ = at;
    sim.set_timer(wiring_->servers.at(index_), at, generation_);
}

void RaftServerHandler::arm(Simulator& sim) {
    scheduled_at_ = sim::kNever;
    reschedule(sim);
}

void RaftServerHandler::crash() {
    persisted_ = node_.persistent();
}

void RaftServerHandler::restart(Simulator& sim) {
    ++incarnation_;
    PersistentState state = persisted_ ? *persisted_ : node_.persistent();
    node_ = RaftNode::restore(index_, wiring_->servers.size(), config_, node_seed(), elements_, std::move(state), sim.now());
    ++generation_;
    arm(sim);
}

// ---------------------------------------------------------------------------

RaftClientHandler::RaftClientHandler(std::uint64_t client_id, NodeId self, std::shared_ptr<const RaftWiring> wiring,
                                     Options options)
    : client_id_(client_id), self_(self), wiring_(std::move(wiring)), options_(std::move(options)) {}

std::uint64_t RaftClientHandler::submit(Simulator& sim, Payload payload) {
    const std::uint64_t id = next_request_++;
    pending_.emplace(id, Pending{std::move(payload), sim.now(), sim.now(), 0});
    send(sim, id);
    return id;
}

void RaftClientHandler::send(Simulator& sim, std::uint64_t request_id) {
    Pending& p = pending_.at(request_id);
    if (p.attempts > 0) {
        ++resends_;
    }
    ++p.attempts;
    p.last_sent = sim.now();
    ClientWrite cw{client_id_, request_id, p.payload};
    const std::uint32_t size = wire_size(RaftMessage{cw});
    sim.send(self_, wiring_->servers.at(hint_ % wiring_->servers.size()),
             RaftWire{{Destination::Kind::Client, client_id_}, std::move(cw)}, size);
    if (options_.retries) {
        sim.set_timer(self_, sim.now() + options_.retry_timeout, request_id);
    }
}

void RaftClientHandler::schedule_open_loop(Simulator& sim, VirtualTime start, VirtualTime interval, std::size_t count,
                                           std::function<Payload(std::size_t)> make) {
    const std::uint64_t gen = generators_.size();
    generators_.push_back(std::move(make));
    for (std::size_t k = 0; k < count; ++k) {
        sim.set_timer(self_, start + k * interval, kArrivalFlag | (gen << kGeneratorShift) | k);
    }
}

void RaftClientHandler::on_timer(sim::Context& ctx, std::uint64_t token) {
    if ((token & kArrivalFlag) != 0) {
        const std::uint64_t gen = (token & ~kArrivalFlag) >> kGeneratorShift;
        const std::uint64_t k = token & ((1ULL << kGeneratorShift) - 1);
        submit(ctx.simulator(), generators_.at(gen)(k));
        return;
    }
    auto it = pending_.find(token);
    // Only the timer armed by the latest attempt triggers a retry.
    if (it == pending_.end() || !options_.retries || ctx.now() < it->second.last_sent + options_.retry_timeout) {
        return;
    }
    hint_ = (hint_ + 1) % wiring_->servers.size();
    send(ctx.simulator(), token);
}

void RaftClientHandler::on_packet(sim::Context& ctx, const sim::Packet& pkt) {
    const auto* wire = pkt.as<RaftWire>();
    if (wire == nullptr) {
        return;
    }
    const auto* reply = std::get_if<ClientReply>(&wire->msg);
    if (reply == nullptr) {
        return;
    }
    auto it = pending_.find(reply->request_id);
    if (it == pending_.end()) {
        return;  // late duplicate
    }
    if (reply->committed) {
        const VirtualTime now = ctx.now();
        completed_.emplace(reply->request_id, CompletedWrite{reply->request_id, it->second.first_sent, now, reply->index});
        ctx.stats().record_latency(options_.stats_label, it->second.first_sent, now);
        if (reply->leader_hint) {
            hint_ = *reply->leader_hint;
        }
        pending_.erase(it);
        return;
    }
    if (!reply->rejected.empty()) {
        rejected_.emplace(reply->request_id, reply->rejected);
        pending_.erase(it);
        return;
    }
    const ServerIndex from = static_cast<ServerIndex>(wire->from.id);
    if (reply->leader_hint && *reply->leader_hint != from) {
        hint_ = *reply->leader_hint;
        if (options_.retries) {
            send(ctx.simulator(), reply->request_id);
        }
    }
}

// ---------------------------------------------------------------------------

void ElementSwitchHandler::on_packet(sim::Context&, const sim::Packet& pkt) {
    const auto* wire = pkt.as<RaftWire>();
    if (wire == nullptr) {
        return;
    }
    const auto* update = std::get_if<SwitchUpdate>(&wire->msg);
    if (update == nullptr) {
        return;
    }
    updates_.push_back(ReceivedUpdate{update->index, update->payload, pkt.sent_at, pkt.nic_egress_at, pkt.nic_ingress_at});
    if (const auto* r = std::get_if<monitor::ReflexCommand>(&update->payload)) {
        apply_body(state_, r->body);
    } else if (const auto* c = std::get_if<ControlCommand>(&update->payload)) {
        apply_body(state_, c->body);
    }
}

// ---------------------------------------------------------------------------

RaftCluster::RaftCluster(ClusterConfig config) : config_(std::move(config)) {
    if (config_.replicas == 0) {
        throw RaftError(RaftError::Code::InvalidConfig, "cluster needs at least one replica");
    }
    std::vector<std::string> hosts;
    for (std::size_t i = 0; i < config_.replicas; ++i) hosts.push_back("raft" + std::to_string(i));
    for (std::size_t i = 0; i < config_.clients; ++i) hosts.push_back("client" + std::to_string(i));
    for (ElementId e : config_.elements) {
        if (e == kStoreElement) {
            throw RaftError(RaftError::Code::InvalidConfig, "element id 0 is reserved for the key-value space");
        }
        hosts.push_back("element" + std::to_string(e));
    }
    auto topo = sim::Topology::build(sim::TopologySpec::star(hosts, "fabric", config_.link_latency,
                                                             config_.switch_latency, config_.mac_serial_ns));
    sim_ = std::make_unique<Simulator>(topo, sim::SimConfig{config_.seed, config_.link_jitter_ns, config_.record_trace});

    wiring_ = std::make_shared<RaftWiring>();
    for (std::size_t i = 0; i < config_.replicas; ++i) wiring_->servers.push_back(topo->id_of("raft" + std::to_string(i)));
    for (std::size_t i = 0; i < config_.clients; ++i) wiring_->clients[i + 1] = topo->id_of("client" + std::to_string(i));
    for (ElementId e : config_.elements) wiring_->elements[e] = topo->id_of("element" + std::to_string(e));

    const std::set<ElementId> elements(config_.elements.begin(), config_.elements.end());
    const sim::NodeConfig server_cfg{sim::ServiceTime::constant(0), config_.rx_queue_capacity};
    for (std::size_t i = 0; i < config_.replicas; ++i) {
        auto h = std::make_shared<RaftServerHandler>(static_cast<ServerIndex>(i), wiring_, config_.raft, config_.service,
                                                     config_.seed, elements);
        sim_->attach(wiring_->servers[i], h, server_cfg);
        servers_.push_back(std::move(h));
    }
    for (std::size_t i = 0; i < config_.clients; ++i) {
        RaftClientHandler::Options opts;
        opts.retries = config_.client_retries;
        opts.retry_timeout = config_.client_retry_timeout;
        auto h = std::make_shared<RaftClientHandler>(i + 1, wiring_->clients[i + 1], wiring_, opts);
        sim_->attach(wiring_->clients[i + 1], h, sim::NodeConfig{sim::ServiceTime::constant(0), 1 << 20});
        clients_.push_back(std::move(h));
    }
    for (ElementId e : config_.elements) {
        auto h = std::make_shared<ElementSwitchHandler>(e);
        sim_->attach(wiring_->elements[e], h, sim::NodeConfig{sim::ServiceTime::constant(0), 1 << 20});
        elements_.emplace(e, std::move(h));
    }
    for (auto& s : servers_) {
        s->arm(*sim_);
    }
}

std::optional<ServerIndex> RaftCluster::leader() const {
    std::optional<ServerIndex> best;
    for (ServerIndex i = 0; i < servers_.size(); ++i) {
        const RaftNode& n = servers_[i]->node();
        if (is_up(i) && n.role() == Role::Leader && (!best || n.current_term() > node(*best).current_term())) {
            best = i;
        }
    }
    return best;
}

ServerIndex RaftCluster::wait_for_leader(VirtualTime timeout) {
    auto ready = [&] {
        auto l = leader();
        if (!l) return false;
        const RaftNode& n = node(*l);
        return n.commit_index() > 0 && n.term_at(n.commit_index()) == n.current_term();
    };
    sim_->run_until(sim_->now() + timeout, ready);
    if (!ready()) {
        throw RaftError(RaftError::Code::Timeout, "no leader elected within " + std::to_string(timeout) + " ns");
    }
    const ServerIndex l = *leader();
    for (auto& c : clients_) {
        c->set_leader_hint(l);
    }
    return l;
}

CommitReceipt RaftCluster::client_write(Payload payload, std::size_t client, VirtualTime timeout) {
    if (auto problem = payload_problem(payload); !problem.empty()) {
        throw RaftError(RaftError::Code::InvalidPayload, problem);
    }
    RaftClientHandler& c = *clients_.at(client);
    if (auto l = leader()) {
        c.set_leader_hint(*l);
    }
    const std::uint64_t id = c.submit(*sim_, std::move(payload));
    auto finished = [&] { return c.completed().contains(id) || c.rejected().contains(id); };
    sim_->run_until(sim_->now() + timeout, finished);
    if (auto it = c.rejected().find(id); it != c.rejected().end()) {
        const bool unknown = it->second.rfind("unknown element", 0) == 0;
        throw RaftError(unknown ? RaftError::Code::UnknownElement : RaftError::Code::InvalidPayload, it->second);
    }
    auto it = c.completed().find(id);
    if (it == c.completed().end()) {
        throw RaftError(RaftError::Code::Timeout, "write " + std::to_string(id) + " not committed in time");
    }
    return CommitReceipt{it->second.latency(), id, it->second.index};
}

CommitReceipt RaftCluster::control_write(ControlCommand cmd, VirtualTime timeout) {
    if (!elements_.contains(cmd.target)) {
        throw RaftError(RaftError::Code::UnknownElement, "unknown element " + std::to_string(cmd.target));
    }
    return client_write(std::move(cmd), 0, timeout);
}

ElementState RaftCluster::read_element_state(ElementId element) const {
    auto l = leader();
    if (!l) {
        throw RaftError(RaftError::Code::NoLeader, "no leader to read from");
    }
    return node(*l).store().state(element);
}

void RaftCluster::crash(ServerIndex i) {
    servers_.at(i)->crash();
    sim_->crash(wiring_->servers.at(i));
}

void RaftCluster::restart(ServerIndex i) {
    sim_->restart(wiring_->servers.at(i));
    servers_.at(i)->restart(*sim_);
}

void RaftCluster::run_for(VirtualTime duration) {
    sim_->run_until(sim_->now() + duration);
}

void RaftCluster::dump_state(std::ostream& out) const {
    for (ServerIndex i = 0; i < servers_.size(); ++i) {
        const RaftNode& n = node(i);
        nlohmann::json j;
        j["t"] = sim_->now();
        j["server"] = i;
        j["up"] = is_up(i);
        j["role"] = to_string(n.role());
        j["term"] = n.current_term();
        j["voted_for"] = n.voted_for() ? nlohmann::json(*n.voted_for()) : nlohmann::json(nullptr);
        j["leader_hint"] = n.leader_hint() ? nlohmann::json(*n.leader_hint()) : nlohmann::json(nullptr);
        j["last_index"] = n.last_index();
        j["last_term"] = n.term_at(n.last_index());
        j["commit_index"] = n.commit_index();
        j["last_applied"] = n.last_applied();
        j["state_digest"] = n.store().digest();
        out << j.dump() << '\n';
    }
}

VirtualTime analytic_write_latency(VirtualTime link_latency, VirtualTime switch_latency, VirtualTime mac_serial_ns,
                                   const ServiceProfile& service) {
    const VirtualTime traversal = 2 * mac_serial_ns + 2 * link_latency + switch_latency;
    return 4 * traversal + service.critical_path();
}

}  // namespace reflex::raft
