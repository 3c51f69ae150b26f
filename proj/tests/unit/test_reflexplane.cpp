#include "reflex/classifier/rule_parser.hpp"
#include "reflex/reflexplane/plane.hpp"
#include "reflex/scenario/experiments.hpp"
#include "reflex/scenario/fixtures.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace reflex;
using namespace reflex::plane;
using scenario::make_anomaly_trace;

namespace {

monitor::MonitorSpec path_monitor(std::string id = "pl") {
    monitor::MonitorSpec m;
    m.id = std::move(id);
    m.kind = monitor::MonitorKind::PathLatency;
    m.path_latency.threshold_ns = 500;
    return m;
}

PlaneConfig base_config(std::string_view preset = "nanopu") {
    PlaneConfig c;
    c.apply_preset(preset);
    c.monitors = {path_monitor()};
    c.elements = scenario::default_element_ports();
    return c;
}

// Anomaly-free stream: every flow keeps its latency.
std::vector<telemetry::IntReport> flat_reports(std::size_t n) {
    scenario::AnomalyTraceParams p;
    p.flows = 5;
    p.reports_per_flow = n / 5;
    p.spike_flow = 0;
    p.spike_report = 10;
    p.spike_ns = 0;
    return make_anomaly_trace(p).reports;
}

void check_monotone(const ReflexTrace& t) {
    auto chain = t.chain();
    CHECK(std::is_sorted(chain.begin(), chain.end()));
}

}  // namespace

TEST_CASE("minimal plane builds and stays quiet") {
    PlaneConfig c;
    c.monitors = {path_monitor()};
    auto p = Plane::build(c);
    p->start();
    REQUIRE(p->leader());
    p->sim().run_until(p->sim().now() + 2'000'000);
    CHECK(p->recorder().commands.empty());
    CHECK(p->classifier_count() == 1);
    CHECK(p->monitor_count() == 1);
}

TEST_CASE("build validation") {
    auto expect_path = [](PlaneConfig c, const std::string& path) {
        try {
            Plane::build(std::move(c));
            FAIL("expected PlaneError at " << path);
        } catch (const PlaneError& e) {
            CHECK(e.path() == path);
        }
    };
    auto c = base_config();
    c.ruleset = classify::parse_ruleset("@0.0.0.0/0 0.0.0.0/0 0:65535 0:65535 0x00/0x00 -> pl,ghost\n");
    expect_path(c, "ruleset");

    c = base_config();
    c.raft_replicas = 4;
    expect_path(c, "raft.replicas");
    c = base_config();
    c.classifiers = 0;
    expect_path(c, "classifiers");
    c = base_config();
    c.monitors.clear();
    expect_path(c, "monitors");
    c = base_config();
    c.monitors.push_back(path_monitor());
    expect_path(c, "monitors[1].id");

    PlaneConfig bad;
    CHECK_THROWS_AS(bad.apply_preset("fast"), PlaneError);
}

TEST_CASE("presets") {
    PlaneConfig c;
    c.apply_preset("nanopu");
    CHECK(c.monitor_service_ns == 50);
    CHECK(c.mac_serial_ns == 26);
    CHECK(c.classifier_service_ns == 50);
    CHECK(c.raft_service.critical_path() == 1532);
    c.apply_preset("zero");
    CHECK(c.monitor_service_ns == 0);
    CHECK(c.classifier_service_ns == 0);
    CHECK(c.mac_serial_ns == 0);
    CHECK(c.raft_service.critical_path() == 0);
}

TEST_CASE("no anomalies, no commands") {
    auto p = Plane::build(base_config());
    p->start();
    auto reports = flat_reports(100);
    REQUIRE(reports.size() == 100);
    auto r = p->inject_reports(reports, 1e6);
    CHECK(r.reports_injected == 100);
    CHECK(r.reports_classified == 100);
    CHECK(r.reports_monitored == 100);
    CHECK(r.commands.empty());
    CHECK(r.total_drops() == 0);
}

TEST_CASE("planted spike gives one reroute through the full chain") {
    auto trace = make_anomaly_trace({});
    REQUIRE(trace.spikes.size() == 1);
    auto cfg = base_config();
    auto p = Plane::build(cfg);
    p->start();
    auto r = p->inject_reports(trace.reports, 1e6);
    REQUIRE(r.commands.size() == 1);
    REQUIRE(r.traces.size() == 1);
    const auto& cmd = r.commands[0];
    const auto& rr = std::get<monitor::Reroute>(cmd.body);
    auto idx = scenario::command_report_indices(r);
    CHECK(scenario::observed_spikes(r.commands, idx) == trace.spikes);
    CHECK(rr.at_switch == cmd.target_element);

    const auto& t = r.traces[0];
    CHECK(t.command_id == cmd.command_id);
    CHECK(t.delivered());
    check_monotone(t);

    // nanopu: mac 26, link 43, switch 300 => wire 386, NIC-to-NIC hop 438.
    //   classify  26 rx + 50 service                        =   76
    //   to monitor 26 tx + 386                               =  412
    //   monitor   26 rx + 50 service                        =   76
    //   egress    26 tx                                      =   26
    //   to commit 386 + 26 + 1000 + 438 + 32 + 438 + 500     = 2820
    //   update    26 tx, then 386 to the switch NIC          =  412
    CHECK(t.classify_done - t.report_ingress == 76);
    CHECK(t.monitor_ingress - t.classify_done == 412);
    CHECK(t.monitor_decision - t.monitor_ingress == 76);
    CHECK(t.command_egress - t.monitor_decision == 26);
    CHECK(*t.raft_commit - t.command_egress == 2820);
    CHECK(*t.update_egress - *t.raft_commit == 26);
    CHECK(*t.switch_arrival - *t.update_egress == 386);
    CHECK(t.e2e() == 3822);
    CHECK(analytic_e2e_latency(cfg) == 3822);
    CHECK(r.stages.at("e2e").max_ns == 3822);

    // Read-after-reflex: the committed reroute is visible to the control plane
    // and at the switch itself.
    CHECK(p->read_element_state(rr.at_switch).forwarding_table.at(rr.flow) == rr.new_egress_port);
    CHECK(p->switch_state(rr.at_switch).forwarding_table.at(rr.flow) == rr.new_egress_port);
}

TEST_CASE("e2e oracle across topologies") {
    for (VirtualTime sw : {1u, 300u}) {
        for (VirtualTime mac : {0u, 26u}) {
            auto cfg = base_config();
            cfg.switch_latency = sw;
            cfg.mac_serial_ns = mac;
            auto p = Plane::build(cfg);
            p->start();
            auto r = p->inject_reports(make_anomaly_trace({}).reports, 1e6);
            REQUIRE(r.traces.size() == 1);
            CHECK(r.traces[0].e2e() == analytic_e2e_latency(cfg));
            CHECK(r.traces[0].e2e() < 10'000);
        }
    }
    auto zero = base_config("zero");
    zero.link_latency = 0;
    zero.switch_latency = 0;
    CHECK(analytic_e2e_latency(zero) == 0);
    auto p = Plane::build(zero);
    p->start();
    auto r = p->inject_reports(make_anomaly_trace({}).reports, 1e6);
    REQUIRE(r.traces.size() == 1);
    CHECK(r.traces[0].e2e() == 0);
}

TEST_CASE("direct reflex latency") {
    struct Case {
        std::string_view preset;
        VirtualTime service;
        VirtualTime mac;
        VirtualTime want;
    };
    for (const auto& k : {Case{"nanopu", 78, 26, 130}, Case{"nanopu", 78, 0, 78}, Case{"zero", 0, 0, 0}}) {
        auto cfg = base_config(k.preset);
        cfg.command_path = CommandPath::Direct;
        cfg.monitor_service_ns = k.service;
        cfg.mac_serial_ns = k.mac;
        auto p = Plane::build(cfg);
        p->start();
        auto r = p->inject_reports(make_anomaly_trace({}).reports, 1e6);
        REQUIRE(r.traces.size() == 1);
        CHECK(r.traces[0].direct() == k.want);
        CHECK(r.stages.at("direct").max_ns == k.want);
        CHECK_FALSE(r.traces[0].raft_commit);
        CHECK(r.traces[0].delivered());
        CHECK(r.traces[0].e2e() == analytic_e2e_latency(cfg));
    }
}

TEST_CASE("determinism") {
    auto once = [] {
        auto p = Plane::build(base_config());
        p->start();
        return p->inject_reports(make_anomaly_trace({}).reports, 2e6);
    };
    auto a = once();
    auto b = once();
    CHECK(a.traces == b.traces);
    CHECK(a.commands == b.commands);
}

TEST_CASE("overload drops at the monitor") {
    auto cfg = base_config();
    cfg.command_path = CommandPath::Direct;
    cfg.monitor_service_ns = 500;
    cfg.rx_queue_capacity = 32;
    auto p = Plane::build(cfg);
    p->start();
    auto reports = flat_reports(2000);
    auto r = p->inject_reports(reports, 10e6);
    CHECK(r.drops_per_node.at("mon-pl") > 0);
    CHECK(r.reports_monitored + r.drops_per_node.at("mon-pl") == reports.size());
}

TEST_CASE("partitioned classifiers still see the spike once") {
    auto cfg = base_config();
    cfg.classifiers = 4;
    cfg.shard_mode = classify::ShardMode::PartitionByHash;
    auto p = Plane::build(cfg);
    p->start();
    auto trace = make_anomaly_trace({});
    auto r = p->inject_reports(trace.reports, 1e6);
    CHECK(r.reports_classified == trace.reports.size());
    CHECK(scenario::observed_spikes(r.commands, scenario::command_report_indices(r)) == trace.spikes);
}

TEST_CASE("rules route reports to selected monitors") {
    auto cfg = base_config();
    cfg.monitors = {path_monitor("a"), path_monitor("b")};
    // Only flows from 10.0.0.8 reach "b"; everything else goes to "a".
    cfg.ruleset = classify::parse_ruleset(
        "@10.0.0.8/32 0.0.0.0/0 0:65535 0:65535 0x00/0x00 -> b\n"
        "@0.0.0.0/0 0.0.0.0/0 0:65535 0:65535 0x00/0x00 -> a\n");
    auto p = Plane::build(cfg);
    p->start();
    auto trace = make_anomaly_trace({});
    auto r = p->inject_reports(trace.reports, 1e6);
    REQUIRE(r.commands.size() == 1);
    CHECK(r.commands[0].origin == "b");
    CHECK(std::get<monitor::Reroute>(r.commands[0].body).flow == trace.spikes[0].flow);
}

TEST_CASE("unmatched reports are counted") {
    auto cfg = base_config();
    cfg.ruleset = classify::parse_ruleset("@192.168.0.0/16 0.0.0.0/0 0:65535 0:65535 0x00/0x00 -> pl\n");
    auto p = Plane::build(cfg);
    p->start();
    auto r = p->inject_reports(flat_reports(100), 1e6);
    CHECK(r.reports_classified == 100);
    CHECK(r.reports_unmatched == 100);
    CHECK(r.reports_monitored == 0);
}

TEST_CASE("control-plane writes") {
    auto p = Plane::build(base_config());
    p->start();
    auto rx = p->control_write(raft::ControlCommand{2, monitor::SetParam{"ecmp", 3}});
    CHECK(rx.latency > 0);
    CHECK(p->read_element_state(2).params.at("ecmp") == 3);
    CHECK(p->switch_state(2).params.at("ecmp") == 3);
    CHECK_THROWS(p->read_element_state(42));
}

TEST_CASE("every command traces back to an ingress report") {
    scenario::AnomalyTraceParams params;
    params.flows = 50;
    params.reports_per_flow = 40;
    params.seed = 9;
    auto trace = make_anomaly_trace(params);
    auto p = Plane::build(base_config());
    p->start();
    auto r = p->inject_reports(trace.reports, 2e6);
    REQUIRE_FALSE(r.commands.empty());
    for (const auto& cmd : r.commands) {
        auto it = std::find_if(r.traces.begin(), r.traces.end(), [&](const auto& t) { return t.command_id == cmd.command_id; });
        REQUIRE(it != r.traces.end());
        CHECK(it->report_id >= 1);
        CHECK(it->report_id <= trace.reports.size());
        check_monotone(*it);
    }
    std::ostringstream os;
    p->dump_traces(os);
    std::istringstream is(os.str());
    std::size_t lines = 0;
    for (std::string line; std::getline(is, line); ++lines) CHECK(nlohmann::json::parse(line).contains("command_id"));
    CHECK(lines == r.traces.size());
}

TEST_CASE("bottleneck law") {
    for (VirtualTime s : {20u, 50u, 100u, 200u, 500u}) {
        auto cfg = base_config("zero");
        cfg.classifier_service_ns = s;
        cfg.monitor_service_ns = 50;
        const double want = 1e9 / static_cast<double>(std::max<VirtualTime>(s, 50));
        const double got = scenario::plane_throughput(cfg, 4000);
        CHECK(std::abs(got - want) / want < 0.01);
    }
}

TEST_CASE("monitor capacity at 50 ns per report") {
    auto probe = scenario::monitor_capacity(50);
    CHECK(probe.min_interval_ns == 50);
    CHECK(probe.max_rate_rps == 20'000'000);
    CHECK(probe.drops_below > 0);
}
