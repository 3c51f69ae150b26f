#include "reflex/simnet/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace reflex::sim;

namespace {

struct Ping {
    int hops_left = 0;
};

/// Records arrivals; optionally bounces pings back to `peer`.
class Recorder final : public NodeHandler {
public:
    std::vector<Packet> got;
    std::optional<NodeId> peer;

    void on_packet(Context& ctx, const Packet& pkt) override {
        got.push_back(pkt);
        if (const auto* p = pkt.as<Ping>(); p && peer && p->hops_left > 1) {
            ctx.send(*peer, Ping{p->hops_left - 1}, 0);
        }
    }
};

std::shared_ptr<const Topology> star(VirtualTime link, VirtualTime sw, VirtualTime mac = 0) {
    return Topology::build(TopologySpec::star({"a", "b", "c", "d"}, "hub", link, sw, mac));
}

}  // namespace

TEST_CASE("star transit is link + switch + link") {
    auto t = star(43, 300);
    CHECK(t->transit(t->id_of("a"), t->id_of("b"), 100) == 386);
    auto fast = star(43, 1);
    CHECK(fast->transit(fast->id_of("a"), fast->id_of("d"), 100) == 87);
}

TEST_CASE("direct zero-latency link") {
    TopologySpec spec;
    spec.nodes = {{"x", NodeKind::Host, 0, 0}, {"y", NodeKind::Host, 0, 0}};
    spec.links = {{"x", "y", 0, {}}};
    auto t = Topology::build(spec);
    CHECK(t->transit(t->id_of("x"), t->id_of("y"), 1500) == 0);
}

TEST_CASE("serialization on a finite link") {
    TopologySpec spec;
    spec.nodes = {{"x", NodeKind::Host, 0, 0}, {"y", NodeKind::Host, 0, 0}};
    spec.links = {{"x", "y", 0, Bandwidth{1, 10}}};  // 0.1 bit/ns
    auto t = Topology::build(spec);
    CHECK(t->transit(t->id_of("x"), t->id_of("y"), 100) == 8000);
    CHECK(Bandwidth{3, 1}.serialization(1) == 3);  // ceil(8/3)
}

TEST_CASE("topology validation errors") {
    TopologySpec dangling;
    dangling.nodes = {{"a", NodeKind::Host, 0, 0}};
    dangling.links = {{"a", "n9", 1, {}}};
    try {
        Topology::build(dangling);
        FAIL("expected DanglingEndpoint");
    } catch (const TopologyError& e) {
        CHECK(e.code() == TopologyError::Code::DanglingEndpoint);
    }
    TopologySpec dup;
    dup.nodes = {{"a", NodeKind::Host, 0, 0}, {"a", NodeKind::Host, 0, 0}};
    CHECK_THROWS_AS(Topology::build(dup), TopologyError);

    TopologySpec apart;
    apart.nodes = {{"a", NodeKind::Host, 0, 0}, {"b", NodeKind::Host, 0, 0}};
    auto t = Topology::build(apart);
    CHECK_FALSE(t->has_path(t->id_of("a"), t->id_of("b")));
    CHECK_THROWS_AS(t->path(t->id_of("a"), t->id_of("b")), TopologyError);
}

TEST_CASE("hosts never forward") {
    // a - h - b where h is a host: no path a->b.
    TopologySpec spec;
    spec.nodes = {{"a", NodeKind::Host, 0, 0}, {"h", NodeKind::Host, 0, 0}, {"b", NodeKind::Host, 0, 0}};
    spec.links = {{"a", "h", 1, {}}, {"h", "b", 1, {}}};
    auto t = Topology::build(spec);
    CHECK_FALSE(t->has_path(t->id_of("a"), t->id_of("b")));
}

TEST_CASE("send delivers at now + path latency") {
    auto t = star(43, 300);
    Simulator sim(t);
    auto rec = std::make_shared<Recorder>();
    sim.attach(t->id_of("b"), rec);
    sim.set_timer(t->id_of("a"), 1000, 0);
    sim.run_until(999);
    const auto r = sim.send(t->id_of("a"), t->id_of("b"), Ping{}, 64);
    CHECK(r.nic_ingress_at == 386);  // sent at now = 0
    sim.run_until(10'000);
    REQUIRE(rec->got.size() == 1);
    CHECK(rec->got[0].nic_ingress_at == 386);
}

TEST_CASE("mac/serial is charged at both NICs") {
    auto t = star(43, 300, 26);
    Simulator sim(t);
    auto rec = std::make_shared<Recorder>();
    sim.attach(t->id_of("b"), rec);
    const auto r = sim.send(t->id_of("a"), t->id_of("b"), Ping{}, 64);
    CHECK(r.nic_egress_at == 26);
    CHECK(r.nic_ingress_at == 26 + 386);
    sim.run_until(10'000);
    CHECK(rec->got.at(0).enqueued_at == 26 + 386 + 26);
}

TEST_CASE("empty queue run") {
    Simulator sim(star(1, 1));
    const auto s = sim.run_until(1'000'000);
    CHECK(s.events == 0);
    CHECK(s.final_time == 0);
}

TEST_CASE("ten-hop self-ping chain") {
    TopologySpec spec;
    spec.nodes = {{"x", NodeKind::Host, 0, 0}, {"y", NodeKind::Host, 0, 0}};
    spec.links = {{"x", "y", 100, {}}};
    auto t = Topology::build(spec);
    Simulator sim(t);
    auto x = std::make_shared<Recorder>();
    auto y = std::make_shared<Recorder>();
    x->peer = t->id_of("y");
    y->peer = t->id_of("x");
    sim.attach(t->id_of("x"), x);
    sim.attach(t->id_of("y"), y);
    sim.send(t->id_of("x"), t->id_of("y"), Ping{10}, 0);
    const auto s = sim.run_until(1'000'000);
    // Zero service: each hop is one arrival plus one service completion.
    CHECK(x->got.size() + y->got.size() == 10);
    CHECK(s.final_time == 1000);
    CHECK(s.events == 20);
}

TEST_CASE("equal-time events run in insertion order") {
    auto t = star(5, 0);
    Simulator sim(t, SimConfig{1, 0, true});
    auto rec = std::make_shared<Recorder>();
    sim.attach(t->id_of("d"), rec);
    for (int i = 0; i < 5; ++i) {
        sim.inject(t->id_of("d"), Ping{i}, 1, 100);
    }
    sim.run_until(1000);
    REQUIRE(rec->got.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(rec->got[i].as<Ping>()->hops_left == i);
    }
}

TEST_CASE("bounded queue counts the message in service") {
    auto t = star(0, 0);
    Simulator sim(t);
    auto rec = std::make_shared<Recorder>();
    sim.attach(t->id_of("a"), rec, NodeConfig{ServiceTime::constant(100), 2});
    for (int i = 0; i < 5; ++i) {
        sim.inject(t->id_of("a"), Ping{}, 1, 0);
    }
    const auto s = sim.run_until(10'000);
    CHECK(rec->got.size() == 2);
    CHECK(sim.counters(t->id_of("a")).dropped == 3);
    CHECK(s.injected == s.delivered + s.dropped + s.in_flight);
    CHECK_THROWS(sim.attach(t->id_of("b"), rec, NodeConfig{ServiceTime::constant(0), 0}));
}

TEST_CASE("queue law: arrivals faster than service drop, slower ones never queue") {
    auto t = star(0, 0);
    for (VirtualTime gap : {VirtualTime{9}, VirtualTime{11}}) {
        Simulator sim(t);
        auto rec = std::make_shared<Recorder>();
        sim.attach(t->id_of("a"), rec, NodeConfig{ServiceTime::constant(10), 8});
        for (int i = 0; i < 1000; ++i) {
            sim.inject(t->id_of("a"), Ping{}, 1, i * gap);
        }
        sim.run_until(1'000'000);
        if (gap < 10) {
            CHECK(sim.counters(t->id_of("a")).dropped > 0);
        } else {
            CHECK(sim.counters(t->id_of("a")).dropped == 0);
            CHECK(sim.counters(t->id_of("a")).max_occupancy <= 1);
        }
    }
}

TEST_CASE("crash drops held messages and stale timers") {
    class Timed final : public NodeHandler {
    public:
        int fired = 0;
        void on_packet(Context&, const Packet&) override {}
        void on_timer(Context&, std::uint64_t) override { ++fired; }
    };
    auto t = star(0, 0);
    Simulator sim(t);
    auto h = std::make_shared<Timed>();
    const auto a = t->id_of("a");
    sim.attach(a, h, NodeConfig{ServiceTime::constant(100), 16});
    sim.set_timer(a, 50, 1);
    sim.inject(a, Ping{}, 1, 0);
    sim.inject(a, Ping{}, 1, 0);
    sim.run_until(10);
    sim.crash(a);
    CHECK(sim.counters(a).dropped == 2);
    sim.inject(a, Ping{}, 1, 20);
    sim.restart(a);
    sim.run_until(1000);
    CHECK(h->fired == 0);  // armed before the crash
    CHECK(sim.counters(a).delivered == 1);
}

TEST_CASE("scheduling into the past is a logic error") {
    auto t = star(0, 0);
    Simulator sim(t);
    sim.set_timer(t->id_of("a"), 100, 0);
    sim.run_until(100);
    CHECK_THROWS_AS(sim.set_timer(t->id_of("a"), 50, 0), SimLogicError);
}

TEST_CASE("identical seed and config give identical traces") {
    auto run = [] {
        auto t = star(43, 300);
        Simulator sim(t, SimConfig{7, 20, true});
        auto rec = std::make_shared<Recorder>();
        sim.attach(t->id_of("b"), rec, NodeConfig{ServiceTime::exponential(50), 1024});
        for (int i = 0; i < 200; ++i) {
            sim.inject(t->id_of("a"), Ping{}, 1, i * 10);
            sim.send(t->id_of("c"), t->id_of("b"), Ping{}, 64);
        }
        sim.run_until(1'000'000);
        return std::make_pair(sim.trace(), sim.trace_digest());
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("run_until stops on predicate without passing the last event") {
    auto t = star(0, 0);
    Simulator sim(t);
    auto rec = std::make_shared<Recorder>();
    sim.attach(t->id_of("a"), rec);
    for (int i = 1; i <= 5; ++i) {
        sim.inject(t->id_of("a"), Ping{}, 1, i * 100);
    }
    sim.run_until(10'000, [&] { return rec->got.size() == 2; });
    CHECK(rec->got.size() == 2);
    CHECK(sim.now() == 200);
}

TEST_CASE("nearest-rank statistics") {
    StatsSink s;
    s.record_latency("x", 0, 100);
    s.record_latency("x", 0, 300);
    s.record_latency("x", 0, 200);
    auto st = s.summary("x");
    CHECK(st.p50_ns == 200);
    CHECK(st.max_ns == 300);
    CHECK(st.mean_ns == doctest::Approx(200));

    s.record_sample("one", 1880);
    CHECK(s.summary("one").p50_ns == 1880);
    CHECK(s.summary("one").p99_ns == 1880);

    for (int i = 0; i < 10'000; ++i) s.record_latency("c", 1000, 1386);
    const auto c = s.summary("c");
    CHECK(c.mean_ns == 386.0);
    CHECK(c.p99_ns == 386);
    CHECK(c.count == 10'000);

    CHECK_THROWS_AS(s.record_latency("x", 5, 4), std::invalid_argument);
}

TEST_CASE("percentiles are ordered for random samples") {
    CounterRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<VirtualTime> v(1 + rng.below(300));
        for (auto& x : v) x = rng.below(100000);
        const auto st = summarize(v);
        CHECK(st.p50_ns <= st.p99_ns);
        CHECK(st.p99_ns <= st.max_ns);
        std::sort(v.begin(), v.end());
        // Brute-force nearest rank.
        const auto rank = (99 * v.size() + 99) / 100;
        CHECK(st.p99_ns == v[rank - 1]);
    }
}

TEST_CASE("counter rng is a pure function of key and counter") {
    auto a = CounterRng::named(1, "x");
    auto b = CounterRng::named(1, "x");
    auto c = CounterRng::named(1, "y");
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        CHECK(va != c.next_u64());
    }
    CounterRng r(5);
    for (int i = 0; i < 1000; ++i) {
        const auto u = r.uniform(3, 7);
        CHECK(u >= 3);
        CHECK(u <= 7);
    }
    double sum = 0;
    for (int i = 0; i < 20000; ++i) sum += static_cast<double>(r.exponential(100));
    CHECK(sum / 20000 == doctest::Approx(100).epsilon(0.05));
}
