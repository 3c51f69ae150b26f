#include "reflex/reflexplane/plane.hpp"

#include "reflex/classifier/dispatch.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <ostream>
#include <set>

namespace reflex::plane {

using raft::Destination;
using raft::RaftWire;
using sim::NodeId;

namespace {

constexpr std::uint64_t kControlClient = 1'000'000;

struct PlaneIngress {
    std::uint64_t report_id = 0;
    telemetry::IntReport report;
};

struct PlaneReport {
    std::uint64_t report_id = 0;
    VirtualTime report_ingress = 0;
    VirtualTime classify_done = 0;
    classify::ProjectedReport projected;
};

/// A command sent straight from a monitor to a switch.
struct PlaneCommand {
    ReflexCommand command;
};

std::uint32_t report_bytes(const telemetry::IntReport& r) {
    return static_cast<std::uint32_t>(64 + 32 * r.hops.size());
}

class ClassifierNode final : public sim::NodeHandler {
public:
    ClassifierNode(std::shared_ptr<const classify::ClassifierEngine> engine, std::map<std::string, NodeId> monitors,
                   std::shared_ptr<PlaneRecorder> rec)
        : engine_(std::move(engine)), monitors_(std::move(monitors)), rec_(std::move(rec)) {}

    void on_packet(sim::Context& ctx, const sim::Packet& pkt) override {
        const auto* in = pkt.as<PlaneIngress>();
        if (in == nullptr) {
            return;
        }
        ctx.stats().record_latency("classify", pkt.nic_ingress_at, ctx.now());
        ++rec_->classified;
        const auto match = classify::classify_report(*engine_, in->report);
        if (!match) {
            ++rec_->unmatched;
            return;
        }
        for (auto& [dest, projected] : classify::dispatch(in->report, match)) {
            ctx.send(monitors_.at(dest), PlaneReport{in->report_id, pkt.nic_ingress_at, ctx.now(), std::move(projected)},
                     report_bytes(in->report));
        }
    }

private:
    std::shared_ptr<const classify::ClassifierEngine> engine_;
    std::map<std::string, NodeId> monitors_;
    std::shared_ptr<PlaneRecorder> rec_;
};

class MonitorNode final : public sim::NodeHandler {
public:
    MonitorNode(std::unique_ptr<monitor::Monitor> impl, std::uint64_t client_id, CommandPath path,
                VirtualTime service, std::shared_ptr<const raft::RaftWiring> wiring, std::shared_ptr<PlaneRecorder> rec)
        : impl_(std::move(impl)),
          client_id_(client_id),
          path_(path),
          service_(service),
          wiring_(std::move(wiring)),
          rec_(std::move(rec)) {}

    std::optional<VirtualTime> service_time(const sim::Packet& pkt) const override {
        return pkt.as<PlaneReport>() != nullptr ? service_ : 0;
    }

    void on_packet(sim::Context& ctx, const sim::Packet& pkt) override {
        if (const auto* r = pkt.as<PlaneReport>()) {
            on_report(ctx, pkt, *r);
        } else if (const auto* w = pkt.as<RaftWire>()) {
            on_reply(ctx, *w);
        }
    }

    void set_leader_hint(raft::ServerIndex s) noexcept { hint_ = s; }

private:
    void on_report(sim::Context& ctx, const sim::Packet& pkt, const PlaneReport& r) {
        ctx.stats().record_latency("monitor", pkt.nic_ingress_at, ctx.now());
        ++rec_->monitored;
        rec_->monitor_completions.push_back(ctx.now());
        for (auto& cmd : impl_->observe(r.projected, ctx.now())) {
            ReflexTrace t;
            t.report_id = r.report_id;
            t.command_id = cmd.command_id;
            t.report_ingress = r.report_ingress;
            t.classify_done = r.classify_done;
            t.monitor_ingress = pkt.nic_ingress_at;
            t.monitor_decision = ctx.now();
            sim::SendReceipt receipt;
            if (path_ == CommandPath::Direct) {
                receipt = ctx.send(wiring_->elements.at(cmd.target_element), PlaneCommand{cmd}, 128);
            } else {
                pending_.emplace(cmd.command_id, cmd);
                receipt = send_write(ctx, cmd);
            }
            t.command_egress = receipt.nic_egress_at;
            rec_->traces.emplace(cmd.command_id, t);
            rec_->commands.push_back(std::move(cmd));
        }
    }

    sim::SendReceipt send_write(sim::Context& ctx, const ReflexCommand& cmd) {
        raft::ClientWrite cw{client_id_, cmd.command_id, raft::Payload{cmd}};
        const auto size = raft::wire_size(raft::RaftMessage{cw});
        return ctx.send(wiring_->servers.at(hint_ % wiring_->servers.size()),
                        RaftWire{{Destination::Kind::Client, client_id_}, std::move(cw)}, size);
    }

    void on_reply(sim::Context& ctx, const RaftWire& w) {
        const auto* reply = std::get_if<raft::ClientReply>(&w.msg);
        if (reply == nullptr) {
            return;
        }
        auto it = pending_.find(reply->request_id);
        if (it == pending_.end()) {
            return;
        }
        if (reply->committed || !reply->rejected.empty()) {
            pending_.erase(it);
            return;
        }
        // Redirected: refresh the static hint and resend.
        if (reply->leader_hint && *reply->leader_hint != w.from.id) {
            hint_ = *reply->leader_hint;
            send_write(ctx, it->second);
        }
    }

    std::unique_ptr<monitor::Monitor> impl_;
    std::uint64_t client_id_;
    CommandPath path_;
    VirtualTime service_;
    std::shared_ptr<const raft::RaftWiring> wiring_;
    std::shared_ptr<PlaneRecorder> rec_;
    raft::ServerIndex hint_ = 0;
    std::map<std::uint64_t, ReflexCommand> pending_;
};

class SwitchNode final : public sim::NodeHandler {
public:
    SwitchNode(ElementId id, std::shared_ptr<PlaneRecorder> rec) : rec_(std::move(rec)) { state_.element_id = id; }

    void on_packet(sim::Context&, const sim::Packet& pkt) override {
        const ReflexCommand* cmd = nullptr;
        bool via_raft = false;
        if (const auto* d = pkt.as<PlaneCommand>()) {
            cmd = &d->command;
        } else if (const auto* w = pkt.as<RaftWire>()) {
            if (const auto* u = std::get_if<raft::SwitchUpdate>(&w->msg)) {
                if (const auto* c = std::get_if<ReflexCommand>(&u->payload)) {
                    cmd = c;
                    via_raft = true;
                } else if (const auto* c2 = std::get_if<raft::ControlCommand>(&u->payload)) {
                    raft::apply_body(state_, c2->body);
                }
            }
        }
        if (cmd == nullptr) {
            return;
        }
        raft::apply_body(state_, cmd->body);
        auto it = rec_->traces.find(cmd->command_id);
        if (it == rec_->traces.end() || it->second.switch_arrival) {
            return;  // a new leader may forward an update again
        }
        if (via_raft) {
            it->second.raft_commit = pkt.sent_at;
        }
        it->second.update_egress = pkt.nic_egress_at;
        it->second.switch_arrival = pkt.nic_ingress_at;
    }

    const raft::ElementState& state() const noexcept { return state_; }

private:
    std::shared_ptr<PlaneRecorder> rec_;
    raft::ElementState state_;
};

bool is_odd(std::size_t n) {
    return n % 2 == 1;
}

void validate(const PlaneConfig& c) {
    if (c.classifiers == 0) {
        throw PlaneError("classifiers", "at least one classifier node is required");
    }
    if (c.monitors.empty()) {
        throw PlaneError("monitors", "at least one monitor is required");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < c.monitors.size(); ++i) {
        const auto& m = c.monitors[i];
        const std::string path = "monitors[" + std::to_string(i) + "].id";
        if (m.id.empty()) {
            throw PlaneError(path, "monitor id must not be empty");
        }
        if (!ids.insert(m.id).second) {
            throw PlaneError(path, "duplicate monitor id '" + m.id + "'");
        }
    }
    if (c.command_path == CommandPath::Consensus && (c.raft_replicas == 0 || !is_odd(c.raft_replicas))) {
        throw PlaneError("raft.replicas", "raft cluster size must be odd, got " + std::to_string(c.raft_replicas));
    }
    if (c.command_path == CommandPath::Direct && c.raft_replicas != 0 && !is_odd(c.raft_replicas)) {
        throw PlaneError("raft.replicas", "raft cluster size must be odd or 0, got " + std::to_string(c.raft_replicas));
    }
    if (c.elements.empty()) {
        throw PlaneError("elements", "at least one network element is required");
    }
    if (c.elements.contains(raft::kStoreElement)) {
        throw PlaneError("elements", "element id 0 is reserved");
    }
    if (c.rx_queue_capacity == 0) {
        throw PlaneError("rx_queue_capacity", "must be at least 1");
    }
    if (c.ruleset) {
        try {
            classify::check_destinations(*c.ruleset, ids);
        } catch (const classify::ClassifierError& e) {
            throw PlaneError("ruleset", e.what());
        }
    }
}

std::shared_ptr<const classify::RuleSet> catch_all(const std::vector<monitor::MonitorSpec>& monitors) {
    const auto& schema = classify::reflex_schema();
    classify::Rule rule;
    rule.rule_id = 0;
    rule.priority = 0;
    for (const auto& f : schema) {
        rule.matchers.push_back(classify::FieldMatcher::wildcard(f));
    }
    for (const auto& m : monitors) {
        rule.action.destinations.push_back(m.id);
    }
    return classify::RuleSet::create(schema, {rule});
}

}  // namespace

void PlaneConfig::apply_preset(std::string_view name) {
    if (name == "nanopu") {
        classifier_service_ns = 50;
        monitor_service_ns = 50;
        mac_serial_ns = 26;
        raft_service = raft::ServiceProfile::calibrated();
    } else if (name == "zero") {
        classifier_service_ns = 0;
        monitor_service_ns = 0;
        mac_serial_ns = 0;
        raft_service = raft::ServiceProfile::zero();
    } else {
        throw PlaneError("preset", "unknown preset '" + std::string(name) + "'");
    }
}

std::vector<VirtualTime> ReflexTrace::chain() const {
    std::vector<VirtualTime> c{report_ingress, classify_done, monitor_ingress, monitor_decision, command_egress};
    for (const auto& t : {raft_commit, update_egress, switch_arrival}) {
        if (t) {
            c.push_back(*t);
        }
    }
    return c;
}

std::uint64_t RunReport::total_drops() const {
    std::uint64_t n = 0;
    for (const auto& [name, d] : drops_per_node) {
        (void)name;
        n += d;
    }
    return n;
}

Plane::Plane(PlaneConfig config) : config_(std::move(config)), recorder_(std::make_shared<PlaneRecorder>()) {}

std::unique_ptr<Plane> Plane::build(PlaneConfig config) {
    validate(config);
    std::unique_ptr<Plane> p(new Plane(std::move(config)));
    const PlaneConfig& c = p->config_;

    std::vector<std::string> hosts;
    for (std::size_t i = 0; i < c.classifiers; ++i) hosts.push_back("cls" + std::to_string(i));
    for (const auto& m : c.monitors) hosts.push_back("mon-" + m.id);
    for (std::size_t i = 0; i < c.raft_replicas; ++i) hosts.push_back("raft" + std::to_string(i));
    hosts.push_back("control");
    for (const auto& [e, ports] : c.elements) {
        (void)ports;
        hosts.push_back("sw" + std::to_string(e));
    }
    auto topo = sim::Topology::build(
        sim::TopologySpec::star(hosts, "fabric", c.link_latency, c.switch_latency, c.mac_serial_ns));
    p->sim_ = std::make_unique<sim::Simulator>(topo, sim::SimConfig{c.seed, 0, false});

    auto wiring = std::make_shared<raft::RaftWiring>();
    for (std::size_t i = 0; i < c.raft_replicas; ++i) wiring->servers.push_back(topo->id_of("raft" + std::to_string(i)));
    for (std::size_t i = 0; i < c.monitors.size(); ++i) wiring->clients[i + 1] = topo->id_of("mon-" + c.monitors[i].id);
    wiring->clients[kControlClient] = topo->id_of("control");
    for (const auto& [e, ports] : c.elements) {
        (void)ports;
        wiring->elements[e] = topo->id_of("sw" + std::to_string(e));
    }
    p->wiring_ = wiring;

    // Classification layer.
    auto ruleset = c.ruleset ? c.ruleset : catch_all(c.monitors);
    const auto shards = classify::shard_ruleset(ruleset, c.classifiers, c.shard_mode);
    std::map<std::string, NodeId> monitor_ids;
    for (const auto& m : c.monitors) monitor_ids[m.id] = topo->id_of("mon-" + m.id);
    for (std::size_t i = 0; i < c.classifiers; ++i) {
        const NodeId id = topo->id_of("cls" + std::to_string(i));
        auto engine = classify::ClassifierEngine::build(shards[i], c.engine);
        p->sim_->attach(id, std::make_shared<ClassifierNode>(engine, monitor_ids, p->recorder_),
                        sim::NodeConfig{sim::ServiceTime::constant(c.classifier_service_ns), c.rx_queue_capacity});
        p->classifier_nodes_.push_back(id);
    }

    // Monitoring layer.
    monitor::TopologySnapshot snapshot;
    for (const auto& [e, ports] : c.elements) {
        for (auto port : ports) snapshot.add_port(e, port);
    }
    for (std::size_t i = 0; i < c.monitors.size(); ++i) {
        std::unique_ptr<monitor::Monitor> impl;
        try {
            impl = monitor::make_monitor(c.monitors[i], i, snapshot);
        } catch (const monitor::MonitorError& e) {
            throw PlaneError("monitors[" + std::to_string(i) + "]", e.what());
        }
        auto h = std::make_shared<MonitorNode>(std::move(impl), i + 1, c.command_path, c.monitor_service_ns, wiring,
                                               p->recorder_);
        const NodeId id = monitor_ids.at(c.monitors[i].id);
        p->sim_->attach(id, h, sim::NodeConfig{sim::ServiceTime::constant(0), c.rx_queue_capacity});
        p->monitor_nodes_.push_back(id);
        p->monitor_handlers_.push_back(h);
    }

    // Network state layer.
    std::set<ElementId> elements;
    for (const auto& [e, ports] : c.elements) {
        (void)ports;
        elements.insert(e);
    }
    for (std::size_t i = 0; i < c.raft_replicas; ++i) {
        auto h = std::make_shared<raft::RaftServerHandler>(static_cast<raft::ServerIndex>(i), wiring, c.raft,
                                                           c.raft_service, c.seed, elements);
        p->sim_->attach(wiring->servers[i], h, sim::NodeConfig{sim::ServiceTime::constant(0), c.rx_queue_capacity});
        p->servers_.push_back(std::move(h));
    }
    p->control_ = std::make_shared<raft::RaftClientHandler>(kControlClient, topo->id_of("control"), wiring,
                                                            raft::RaftClientHandler::Options{});
    p->sim_->attach(topo->id_of("control"), p->control_);
    for (const auto& [e, node] : wiring->elements) {
        auto h = std::make_shared<SwitchNode>(e, p->recorder_);
        p->sim_->attach(node, h, sim::NodeConfig{sim::ServiceTime::constant(0), 1 << 20});
        p->switches_.emplace(e, std::move(h));
    }
    for (auto& s : p->servers_) {
        s->arm(*p->sim_);
    }
    return p;
}

std::optional<raft::ServerIndex> Plane::leader() const {
    std::optional<raft::ServerIndex> best;
    for (raft::ServerIndex i = 0; i < servers_.size(); ++i) {
        const auto& n = servers_[i]->node();
        if (sim_->is_up(wiring_->servers[i]) && n.role() == raft::Role::Leader &&
            (!best || n.current_term() > servers_[*best]->node().current_term())) {
            best = i;
        }
    }
    return best;
}

const raft::RaftNode& Plane::raft_node(raft::ServerIndex i) const {
    return servers_.at(i)->node();
}

void Plane::start() {
    if (servers_.empty()) {
        return;
    }
    auto ready = [&] {
        auto l = leader();
        if (!l) return false;
        const auto& n = servers_[*l]->node();
        return n.commit_index() > 0 && n.term_at(n.commit_index()) == n.current_term();
    };
    sim_->run_until(sim_->now() + 10'000'000, ready);
    if (!ready()) {
        throw raft::RaftError(raft::RaftError::Code::Timeout, "plane raft cluster elected no leader");
    }
    const auto l = *leader();
    for (auto& h : monitor_handlers_) {
        static_cast<MonitorNode&>(*h).set_leader_hint(l);
    }
    control_->set_leader_hint(l);
}

RunReport Plane::inject_reports(std::span<const telemetry::IntReport> reports, double rate_rps, VirtualTime lead_ns,
                                VirtualTime drain_ns) {
    if (!(rate_rps > 0)) {
        throw PlaneError("rate_rps", "must be > 0");
    }
    const auto interval = static_cast<VirtualTime>(std::llround(1e9 / rate_rps));
    const VirtualTime start = sim_->now() + lead_ns;
    const std::size_t commands_before = recorder_->commands.size();
    const std::uint64_t classified_before = recorder_->classified;
    const std::uint64_t unmatched_before = recorder_->unmatched;
    const std::uint64_t monitored_before = recorder_->monitored;

    std::size_t rr = 0;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        std::size_t cls = 0;
        if (classifier_nodes_.size() > 1) {
            cls = config_.shard_mode == classify::ShardMode::PartitionByHash
                      ? classify::shard_of_key(classify::flow_key(r.flow), classifier_nodes_.size())
                      : rr++ % classifier_nodes_.size();
        }
        sim_->inject(classifier_nodes_[cls], PlaneIngress{next_report_id_++, r}, report_bytes(r), start + k * interval);
    }
    const VirtualTime last = reports.empty() ? start : start + (reports.size() - 1) * interval;
    sim_->run_until(last + drain_ns);

    RunReport out;
    out.reports_injected = reports.size();
    out.reports_classified = recorder_->classified - classified_before;
    out.reports_unmatched = recorder_->unmatched - unmatched_before;
    out.reports_monitored = recorder_->monitored - monitored_before;
    out.commands.assign(recorder_->commands.begin() + static_cast<std::ptrdiff_t>(commands_before),
                        recorder_->commands.end());
    std::vector<VirtualTime> direct;
    std::vector<VirtualTime> e2e;
    for (const auto& cmd : out.commands) {
        const ReflexTrace& t = recorder_->traces.at(cmd.command_id);
        out.traces.push_back(t);
        direct.push_back(t.direct());
        if (t.delivered()) {
            e2e.push_back(t.e2e());
        }
    }
    out.stages["classify"] = sim_->stats().summary("classify");
    out.stages["monitor"] = sim_->stats().summary("monitor");
    out.stages["direct"] = sim::summarize(direct, 0);
    out.stages["e2e"] = sim::summarize(e2e, out.commands.size() - e2e.size());
    const auto& topo = sim_->topology();
    for (std::uint32_t i = 0; i < topo.node_count(); ++i) {
        out.drops_per_node[topo.node(sim::NodeId{i}).name] = sim_->counters(sim::NodeId{i}).dropped;
    }
    return out;
}

raft::ElementState Plane::read_element_state(ElementId element) const {
    auto l = leader();
    if (!l) {
        throw raft::RaftError(raft::RaftError::Code::NoLeader, "no leader to read from");
    }
    return servers_[*l]->node().store().state(element);
}

raft::CommitReceipt Plane::control_write(raft::ControlCommand cmd, VirtualTime timeout) {
    if (!config_.elements.contains(cmd.target)) {
        throw raft::RaftError(raft::RaftError::Code::UnknownElement, "unknown element " + std::to_string(cmd.target));
    }
    if (auto l = leader()) {
        control_->set_leader_hint(*l);
    }
    const auto id = control_->submit(*sim_, raft::Payload{std::move(cmd)});
    sim_->run_until(sim_->now() + timeout, [&] { return control_->completed().contains(id); });
    auto it = control_->completed().find(id);
    if (it == control_->completed().end()) {
        throw raft::RaftError(raft::RaftError::Code::Timeout, "control write not committed in time");
    }
    return raft::CommitReceipt{it->second.latency(), id, it->second.index};
}

const raft::ElementState& Plane::switch_state(ElementId element) const {
    auto it = switches_.find(element);
    if (it == switches_.end()) {
        throw raft::RaftError(raft::RaftError::Code::UnknownElement, "unknown element " + std::to_string(element));
    }
    return static_cast<const SwitchNode&>(*it->second).state();
}

void Plane::dump_traces(std::ostream& out) const {
    auto opt = [](const std::optional<VirtualTime>& t) { return t ? nlohmann::json(*t) : nlohmann::json(nullptr); };
    for (const auto& [id, t] : recorder_->traces) {
        nlohmann::json j;
        j["command_id"] = id;
        j["report_id"] = t.report_id;
        j["report_ingress"] = t.report_ingress;
        j["classify_done"] = t.classify_done;
        j["monitor_ingress"] = t.monitor_ingress;
        j["monitor_decision"] = t.monitor_decision;
        j["command_egress"] = t.command_egress;
        j["raft_commit"] = opt(t.raft_commit);
        j["update_egress"] = opt(t.update_egress);
        j["switch_arrival"] = opt(t.switch_arrival);
        out << j.dump() << '\n';
    }
}

VirtualTime analytic_e2e_latency(const PlaneConfig& c) {
    const VirtualTime wire = 2 * c.link_latency + c.switch_latency;
    const VirtualTime hop = 2 * c.mac_serial_ns + wire;  // NIC to NIC including both MACs
    VirtualTime t = c.mac_serial_ns + c.classifier_service_ns + hop + c.monitor_service_ns;
    if (c.command_path == CommandPath::Consensus) {
        t += 3 * hop + c.raft_service.critical_path();
    }
    // Last leg ends at the switch NIC, before its receive MAC.
    return t + c.mac_serial_ns + wire;
}

}  // namespace reflex::plane
