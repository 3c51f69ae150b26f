#include "reflex/monitors/budget.hpp"
#include "reflex/monitors/microburst.hpp"
#include "reflex/monitors/monitor.hpp"
#include "reflex/monitors/path_latency.hpp"
#include "reflex/monitors/threshold.hpp"

#include <doctest.h>

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>

using namespace reflex::monitor;
using reflex::classify::ReportField;
using reflex::telemetry::HopMetadata;
using reflex::telemetry::IntReport;

namespace {

FlowKey flow(std::uint32_t i) { return FlowKey{0x0A000000u + i, 0x0A010000u + i, static_cast<std::uint16_t>(1000 + i), 80, 6}; }

IntReport report_with(const FlowKey& f, std::vector<VirtualTime> hop_latencies, std::uint64_t seq = 0) {
    IntReport r;
    r.flow = f;
    r.seq = seq;
    r.pkt_size_bytes = 1500;
    for (std::size_t i = 0; i < hop_latencies.size(); ++i) {
        HopMetadata h;
        h.switch_id = static_cast<std::uint32_t>(i + 1);
        h.ingress_port = 3;
        h.egress_port = 1;
        h.hop_latency_ns = hop_latencies[i];
        r.hops.push_back(h);
    }
    return r;
}

IntReport queue_report(const FlowKey& f, std::uint32_t depth, VirtualTime ts, std::uint32_t sw = 1, std::uint32_t q = 0) {
    IntReport r;
    r.flow = f;
    r.pkt_size_bytes = 1500;
    HopMetadata h;
    h.switch_id = sw;
    h.queue_id = q;
    h.queue_depth = depth;
    h.hop_latency_ns = 100;
    h.timestamp_ns = ts;
    r.hops.push_back(h);
    return r;
}

// From-scratch recomputation: keep the raw window, average it on every step.
struct BruteDetector {
    VirtualTime threshold;
    std::map<FlowKey, std::deque<VirtualTime>> windows;

    bool observe(const FlowKey& f, VirtualTime latency) {
        auto& w = windows[f];
        bool fire = false;
        if (w.size() == 10) {
            long double avg = 0;
            for (auto x : w) avg += x;
            avg /= 10;
            fire = static_cast<long double>(latency) > avg + threshold;
        }
        if (fire) w.clear();
        w.push_back(latency);
        if (w.size() > 10) w.pop_front();
        return fire;
    }
};

}  // namespace

TEST_CASE("path latency: spike after a full window fires") {
    PathLatencyMonitor m("pl", {.threshold_ns = 500});
    auto f = flow(1);
    for (int i = 0; i < 10; ++i) CHECK_FALSE(m.observe(report_with(f, {400, 600}), i));
    auto cmd = m.observe(report_with(f, {400, 1200}), 10);
    REQUIRE(cmd);
    CHECK(std::holds_alternative<Reroute>(cmd->body));
    CHECK(cmd->origin == "pl");
    CHECK(cmd->issued_at == 10);
    CHECK(cmd->command_id == command_id_base(0));
    // The window restarts from the spike sample.
    CHECK(m.flow_state(f)->size() == 1);
    CHECK(m.flow_state(f)->sum() == 1600);
}

TEST_CASE("path latency: equality and warm-up never fire") {
    PathLatencyMonitor m("pl", {.threshold_ns = 1});
    for (int i = 0; i < 200; ++i) CHECK_FALSE(m.observe(report_with(flow(2), {1000}), i));

    PathLatencyMonitor warm("pl", {.threshold_ns = 500});
    for (int i = 0; i < 9; ++i) CHECK_FALSE(warm.observe(report_with(flow(3), {1000}), i));
    CHECK_FALSE(warm.observe(report_with(flow(3), {5000}), 9));

    // Exactly avg + threshold is not an excess.
    PathLatencyMonitor edge("pl", {.threshold_ns = 500});
    for (int i = 0; i < 10; ++i) edge.observe(report_with(flow(4), {1000}), i);
    CHECK_FALSE(edge.observe(report_with(flow(4), {1500}), 10));
    CHECK_THROWS_AS(PathLatencyMonitor("pl", {.threshold_ns = 0}), MonitorError);
}

TEST_CASE("exceeds_average is exact") {
    CHECK(exceeds_average(1501, 10000, 10, 500));
    CHECK_FALSE(exceeds_average(1500, 10000, 10, 500));
    // avg 100.1: 601 > 600.1 but 600 is not.
    CHECK(exceeds_average(601, 1001, 10, 500));
    CHECK_FALSE(exceeds_average(600, 1001, 10, 500));
}

TEST_CASE("window discipline") {
    std::mt19937_64 rng(7);
    FlowLatencyState s;
    std::vector<VirtualTime> all;
    for (int n = 1; n <= 40; ++n) {
        VirtualTime x = rng() % 5000;
        s.push(x);
        all.push_back(x);
        const std::size_t k = std::min<std::size_t>(all.size(), 10);
        CHECK(s.size() == k);
        std::vector<VirtualTime> tail(all.end() - static_cast<std::ptrdiff_t>(k), all.end());
        CHECK(s.samples() == tail);
        VirtualTime sum = 0;
        for (auto v : tail) sum += v;
        CHECK(s.sum() == sum);
    }
    s.reset();
    CHECK(s.size() == 0);
    CHECK(s.sum() == 0);
}

TEST_CASE("detector oracle: random streams over many flows") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        std::mt19937_64 rng(seed);
        const VirtualTime threshold = 200 + seed * 50;
        PathLatencyMonitor m("pl", {.threshold_ns = threshold});
        BruteDetector brute{threshold, {}};
        std::size_t fires = 0, mismatched = 0;
        for (int i = 0; i < 10000; ++i) {
            auto f = flow(static_cast<std::uint32_t>(rng() % 100));
            VirtualTime a = 300 + rng() % 200, b = 300 + rng() % 200;
            if (rng() % 20 == 0) b += 400 + rng() % 600;
            bool got = m.observe(report_with(f, {a, b}), static_cast<VirtualTime>(i)).has_value();
            bool want = brute.observe(f, a + b);
            fires += want;
            mismatched += got != want;
        }
        CHECK(mismatched == 0);
        CHECK(fires > 0);
    }
}

TEST_CASE("choose_reroute_switch") {
    std::vector<VirtualTime> base{200, 200, 200};
    CHECK(choose_reroute_switch(report_with(flow(1), {200, 900, 300}), base) == 1);
    CHECK(choose_reroute_switch(report_with(flow(1), {200, 300, 900}), base) == 2);
    CHECK(choose_reroute_switch(report_with(flow(1), {200, 200, 200}), base) == 1);
    CHECK(choose_reroute_switch(report_with(flow(1), {900, 200, 200}), base) == 1);
    CHECK(choose_reroute_switch(report_with(flow(1), {5000}), std::vector<VirtualTime>{200}) == 1);
}

TEST_CASE("reroute targets the switch before the jump with another port") {
    TopologySnapshot topo;
    for (std::uint32_t sw : {1u, 2u, 3u})
        for (std::uint32_t p : {1u, 2u, 3u, 4u}) topo.add_port(sw, p);
    CHECK(topo.alternative_port(1, 1) == 2);
    CHECK(topo.alternative_port(1, 2) == 1);
    CHECK(topo.alternative_port(9, 5) == 5);

    PathLatencyMonitor m("pl", {.threshold_ns = 500}, topo, command_id_base(3));
    auto f = flow(5);
    for (int i = 0; i < 10; ++i) m.observe(report_with(f, {300, 300, 300}), i);
    CHECK(m.baseline(2, f) == 300);
    auto cmd = m.observe(report_with(f, {300, 300, 1500}), 10);
    REQUIRE(cmd);
    CHECK(cmd->target_element == 2);
    CHECK(cmd->command_id == command_id_base(3));
    CHECK(std::get<Reroute>(cmd->body) == Reroute{f, 2, 2});
}

TEST_CASE("baseline is an EWMA seeded by the first sample") {
    PathLatencyMonitor m("pl", {.threshold_ns = 500});
    auto f = flow(6);
    m.observe(report_with(f, {1000}), 0);
    CHECK(m.baseline(1, f) == 1000);
    m.observe(report_with(f, {2600}), 1);
    CHECK(m.baseline(1, f) == 1100);
    m.observe(report_with(f, {1100}), 2);
    CHECK(m.baseline(1, f) == 1100);
    CHECK_FALSE(m.baseline(2, f));
}

TEST_CASE("microburst: crossing and hysteresis") {
    MicroburstMonitor m("mb", {.depth_threshold_pkts = 10, .top_k = 2});
    auto f = flow(1);
    CHECK(m.observe(queue_report(f, 5, 100), 100).empty());
    CHECK(m.observe(queue_report(f, 8, 200), 200).empty());
    CHECK(m.observe(queue_report(f, 12, 300), 300).size() == 1);
    CHECK(m.observe(queue_report(f, 15, 400), 400).empty());
    CHECK(m.bursts() == 1);

    MicroburstMonitor osc("mb", {.depth_threshold_pkts = 10, .top_k = 1});
    osc.observe(queue_report(f, 12, 1), 1);
    osc.observe(queue_report(f, 9, 2), 2);
    osc.observe(queue_report(f, 12, 3), 3);
    CHECK(osc.bursts() == 2);
    osc.observe(queue_report(f, 10, 4), 4);
    osc.observe(queue_report(f, 11, 5), 5);
    CHECK(osc.bursts() == 3);
}

TEST_CASE("microburst: top contributors") {
    std::map<FlowKey, std::uint64_t> counts{{flow(1), 30}, {flow(2), 20}, {flow(3), 5}};
    auto top = top_contributors(counts, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0] == std::pair{flow(1), std::uint64_t{30}});
    CHECK(top[1] == std::pair{flow(2), std::uint64_t{20}});
    std::map<FlowKey, std::uint64_t> ties{{flow(9), 4}, {flow(3), 4}, {flow(5), 4}};
    auto t = top_contributors(ties, 2);
    CHECK(t[0].first == flow(3));
    CHECK(t[1].first == flow(5));
    CHECK(top_contributors(counts, 10).size() == 3);

    MicroburstMonitor m("mb", {.depth_threshold_pkts = 10, .top_k = 2, .throttle_rate_bits_per_s = 5000});
    VirtualTime t0 = 1000;
    for (int i = 0; i < 30; ++i) m.observe(queue_report(flow(1), 1, t0 + i), 0);
    for (int i = 0; i < 20; ++i) m.observe(queue_report(flow(2), 1, t0 + 100 + i), 0);
    for (int i = 0; i < 4; ++i) m.observe(queue_report(flow(3), 1, t0 + 200 + i), 0);
    auto cmds = m.observe(queue_report(flow(3), 50, t0 + 300), 7);
    REQUIRE(cmds.size() == 2);
    CHECK(std::get<Throttle>(cmds[0].body) == Throttle{flow(1), 5000});
    CHECK(std::get<Throttle>(cmds[1].body) == Throttle{flow(2), 5000});
    CHECK(cmds[0].target_element == 1);
    CHECK(cmds[0].command_id != cmds[1].command_id);
}

TEST_CASE("microburst: trailing window prunes old packets") {
    MicroburstMonitor m("mb", {.depth_threshold_pkts = 10, .top_k = 1, .window_ns = 100'000});
    for (int i = 0; i < 50; ++i) m.observe(queue_report(flow(1), 1, 1000 + i), 0);
    for (int i = 0; i < 5; ++i) m.observe(queue_report(flow(2), 1, 500'000 + i), 0);
    auto cmds = m.observe(queue_report(flow(2), 20, 500'010), 0);
    REQUIRE(cmds.size() == 1);
    CHECK(std::get<Throttle>(cmds[0].body).flow == flow(2));
    const auto* q = m.queue(1, 0);
    REQUIRE(q);
    CHECK(q->counts.count(flow(1)) == 0);
}

TEST_CASE("microburst: random stream invariants") {
    std::mt19937_64 rng(17);
    MicroburstMonitor m("mb", {.depth_threshold_pkts = 10, .top_k = 3, .window_ns = 5000});
    std::uint32_t last = 0;
    std::uint64_t down_crossings = 0;
    std::deque<VirtualTime> times;
    for (int i = 0; i < 20000; ++i) {
        VirtualTime ts = static_cast<VirtualTime>(i) * 50;
        auto depth = static_cast<std::uint32_t>(rng() % 20);
        if (last > 10 && depth <= 10) ++down_crossings;
        last = depth;
        auto cmds = m.observe(queue_report(flow(static_cast<std::uint32_t>(rng() % 8)), depth, ts), ts);
        CHECK(cmds.size() <= 3);
        const auto* q = m.queue(1, 0);
        std::uint64_t total = 0;
        for (const auto& [f, c] : q->counts) {
            CHECK(c > 0);
            total += c;
        }
        times.push_back(ts);
        while (times.front() + 5000 < ts) times.pop_front();
        CHECK(total <= times.size());
    }
    CHECK(m.bursts() <= down_crossings + 1);
    CHECK(m.bursts() > 0);
}

TEST_CASE("threshold monitor") {
    IntReport r = report_with(flow(1), {100, 200});
    r.hops[0].utilization_e4 = 9500;
    r.hops[1].utilization_e4 = 9000;
    auto util = ThresholdSpec::parse("link_utilization", 0.9);
    CHECK(util.limit == 9000);
    auto cmd = threshold_observe(r, util, "th", 5, 77);
    REQUIRE(cmd);
    CHECK(cmd->target_element == 1);
    CHECK(cmd->command_id == 5);
    CHECK(std::get<SetParam>(cmd->body) == SetParam{"alert.link_utilization", 9500});

    r.hops[0].utilization_e4 = 9000;
    CHECK_FALSE(threshold_observe(r, util, "th", 5, 77));
    CHECK_THROWS_AS(ThresholdSpec::parse("bogus", 1), MonitorError);

    // Stateless: same inputs, same output, regardless of interleaving.
    r.hops[1].utilization_e4 = 9999;
    auto a = threshold_observe(r, util, "th", 1, 0);
    threshold_observe(report_with(flow(2), {1}), util, "th", 2, 0);
    CHECK(a == threshold_observe(r, util, "th", 1, 0));
    CHECK(field_value(r, ReportField::LinkUtilization) == std::pair<std::int64_t, std::size_t>{9999, 1});
    CHECK(field_value(r, ReportField::PktSize).first == 1500);
}

TEST_CASE("threshold monitor requires the field in the projection") {
    ThresholdMonitor m("th", ThresholdSpec::parse("queue_depth", 3));
    IntReport r = report_with(flow(1), {100});
    r.hops[0].queue_depth = 4;
    reflex::classify::ProjectedReport full{r, reflex::classify::full_projection()};
    auto cmd = m.observe(full, 0);
    REQUIRE(cmd);
    CHECK(cmd->command_id == command_id_base(0));
    reflex::classify::ProjectedReport none{r, {}};
    CHECK_THROWS_AS(m.observe(none, 0), MonitorError);
}

TEST_CASE("monitor budget") {
    auto b = monitor_budget(8'333'333, 3.2e9);
    CHECK(b.cycles == 384);
    CHECK(b.instructions == 384);
    CHECK(b.ns_per_report == doctest::Approx(120.0).epsilon(1e-6));
    auto c = monitor_budget(20e6, 3.2e9);
    CHECK(c.cycles == 160);
    CHECK(c.ns_per_report == doctest::Approx(50.0));
    CHECK(monitor_budget(8.33e6, 3.2e9).cycles == 384);
    CHECK_THROWS_AS(monitor_budget(0, 3.2e9), MonitorError);
    CHECK_THROWS_AS(monitor_budget(1, 0), MonitorError);
}

TEST_CASE("ephemeral state only delays detection") {
    std::mt19937_64 rng(23);
    std::vector<IntReport> stream;
    for (int i = 0; i < 5000; ++i) {
        auto f = flow(static_cast<std::uint32_t>(rng() % 20));
        VirtualTime lat = 500 + rng() % 100 + (rng() % 25 == 0 ? 2000 : 0);
        stream.push_back(report_with(f, {lat}));
    }
    auto m = std::make_unique<PathLatencyMonitor>("pl", PathLatencyConfig{.threshold_ns = 500});
    std::set<FlowKey> seen_since_restart;
    std::size_t fired = 0;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (i % 997 == 0) {
            m = std::make_unique<PathLatencyMonitor>("pl", PathLatencyConfig{.threshold_ns = 500});
            seen_since_restart.clear();
        }
        auto cmd = m->observe(stream[i], i);
        if (cmd) {
            ++fired;
            CHECK(seen_since_restart.count(std::get<Reroute>(cmd->body).flow) == 1);
            CHECK(m->flow_state(stream[i].flow) != nullptr);
        }
        seen_since_restart.insert(stream[i].flow);
    }
    CHECK(fired > 0);
}

TEST_CASE("make_monitor front") {
    MonitorSpec spec;
    spec.id = "pl";
    auto m = make_monitor(spec, 2);
    CHECK(m->kind() == MonitorKind::PathLatency);
    auto f = flow(1);
    reflex::classify::ProjectedReport pr{report_with(f, {1000}), reflex::classify::full_projection()};
    for (int i = 0; i < 10; ++i) CHECK(m->observe(pr, i).empty());
    pr.report.hops[0].hop_latency_ns = 2000;
    auto cmds = m->observe(pr, 10);
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].command_id == command_id_base(2));
    CHECK(parse_monitor_kind("microburst") == MonitorKind::Microburst);
    CHECK_FALSE(parse_monitor_kind("ddos"));
}
