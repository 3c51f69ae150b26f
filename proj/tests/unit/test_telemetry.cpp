#include "reflex/simnet/rng.hpp"
#include "reflex/telemetry/dedup.hpp"
#include "reflex/telemetry/int_report.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace reflex::telemetry;
using reflex::sim::CounterRng;

namespace {

HopMetadata hop(std::uint32_t sw, VirtualTime lat, VirtualTime ts) {
    HopMetadata h;
    h.switch_id = sw;
    h.ingress_port = 1;
    h.egress_port = 2;
    h.queue_id = 0;
    h.queue_depth = 3;
    h.hop_latency_ns = lat;
    h.utilization_e4 = 4321;
    h.timestamp_ns = ts;
    return h;
}

IntReport report(FlowKey f, std::uint64_t seq, std::vector<HopMetadata> hops) {
    IntReport r;
    r.flow = f;
    r.seq = seq;
    r.hops = std::move(hops);
    r.pkt_size_bytes = 1500;
    return r;
}

const FlowKey kFlow{0x0a000001, 0x0a000002, 1234, 80, 6};

IntReport random_report(CounterRng& rng, std::uint64_t seq) {
    FlowKey f{static_cast<std::uint32_t>(rng.next_u64()), static_cast<std::uint32_t>(rng.next_u64()),
              static_cast<std::uint16_t>(rng.below(65536)), static_cast<std::uint16_t>(rng.below(65536)),
              static_cast<std::uint8_t>(rng.below(256))};
    std::vector<HopMetadata> hops;
    VirtualTime ts = rng.below(1000);
    const auto n = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < n; ++i) {
        HopMetadata h;
        h.switch_id = static_cast<std::uint32_t>(rng.below(1000));
        h.ingress_port = static_cast<std::uint32_t>(rng.below(64));
        h.egress_port = static_cast<std::uint32_t>(rng.below(64));
        h.queue_id = static_cast<std::uint32_t>(rng.below(8));
        h.queue_depth = static_cast<std::uint32_t>(rng.below(500));
        h.hop_latency_ns = rng.below(100000);
        h.utilization_e4 = static_cast<std::uint32_t>(rng.below(kUtilizationScale + 1));
        ts += rng.below(100);
        h.timestamp_ns = ts;
        hops.push_back(h);
    }
    auto r = report(f, seq, hops);
    r.pkt_size_bytes = static_cast<std::uint32_t>(1 + rng.below(9000));
    if (rng.chance(0.3)) {
        r.drop = DropInfo{static_cast<std::uint32_t>(rng.below(n)), static_cast<DropReason>(1 + rng.below(4))};
    }
    return r;
}

}  // namespace

TEST_CASE("sink extraction reverses the INT stack") {
    IntPacket pkt;
    pkt.flow = kFlow;
    pkt.size_bytes = 900;
    pkt.int_stack = {hop(3, 300, 30), hop(2, 500, 20), hop(1, 200, 10)};  // most recent first
    auto [payload, r] = sink_extract(pkt);
    CHECK(payload.flow == kFlow);
    CHECK(payload.size_bytes == 900);
    REQUIRE(r.hops.size() == 3);
    CHECK(r.hops[0].switch_id == 1);
    CHECK(r.hops[2].switch_id == 3);
    CHECK(path_latency(r) == 1000);

    pkt.int_stack = {hop(9, 65, 0)};
    CHECK(sink_extract(pkt).second.hops.size() == 1);

    pkt.int_stack.clear();
    try {
        sink_extract(pkt);
        FAIL("expected EmptyPath");
    } catch (const TelemetryError& e) {
        CHECK(e.code() == TelemetryError::Code::EmptyPath);
    }
}

TEST_CASE("path latency") {
    CHECK(path_latency(report(kFlow, 0, {hop(1, 200, 0), hop(2, 500, 1), hop(3, 300, 2)})) == 1000);
    CHECK(path_latency(report(kFlow, 0, {hop(1, 65, 0)})) == 65);
    std::vector<HopMetadata> zeros(5, hop(1, 0, 0));
    CHECK(path_latency(report(kFlow, 0, zeros)) == 0);
}

TEST_CASE("report validation") {
    CHECK_THROWS_AS(validate(report(kFlow, 0, {})), TelemetryError);
    CHECK_THROWS_AS(validate(report(kFlow, 0, {hop(1, 1, 10), hop(2, 1, 5)})), TelemetryError);  // time goes back
    auto r = report(kFlow, 0, {hop(1, 1, 0)});
    r.drop = DropInfo{1, DropReason::Other};
    CHECK_THROWS_AS(validate(r), TelemetryError);
    auto u = report(kFlow, 0, {hop(1, 1, 0)});
    u.hops[0].utilization_e4 = kUtilizationScale + 1;
    CHECK_THROWS_AS(validate(u), TelemetryError);
}

TEST_CASE("drop reports") {
    const auto r = make_drop_report(kFlow, {hop(1, 1, 0), hop(2, 1, 1), hop(3, 1, 2)}, DropReason::QueueOverflow);
    REQUIRE(r.drop);
    CHECK(r.drop->hop_index == 2);
    CHECK(r.drop->reason == DropReason::QueueOverflow);
    CHECK(make_drop_report(kFlow, {hop(1, 1, 0)}, DropReason::AclDeny).drop->hop_index == 0);
    CHECK_THROWS_AS(make_drop_report(kFlow, {}, DropReason::Other), TelemetryError);
}

TEST_CASE("report rate for a saturated link") {
    CHECK(report_rate_for_link(100'000'000'000ULL, 1500) == 8'333'333);
    CHECK(report_rate_for_link(200'000'000'000ULL, 1500) == 16'666'666);
    CHECK_THROWS_AS(report_rate_for_link(100'000'000'000ULL, 0), TelemetryError);
}

TEST_CASE("trace line format") {
    auto r = report(kFlow, 7, {hop(1, 200, 10), hop(2, 500, 20)});
    r.drop = DropInfo{1, DropReason::QueueOverflow};
    const auto line = format_report(r);
    CHECK(line ==
          "INT flow=10.0.0.1:1234-10.0.0.2:80/6 seq=7 size=1500 "
          "hops=[1:1:2:0:3:200:0.4321:10;2:1:2:0:3:500:0.4321:20] drop=1:QueueOverflow");
    CHECK(parse_report(line) == r);
}

TEST_CASE("trace parser rejects malformed lines with their line number") {
    std::istringstream in(
        "INT flow=10.0.0.1:1-10.0.0.2:2/6 seq=1 size=10 hops=[1:1:2:0:3:200:0.5000:10] drop=-\n"
        "INT flow=10.0.0.1:1-10.0.0.2:2/6 seq=1 size=10 hops=[1:1:2:0:3] drop=-\n");
    try {
        read_trace(in);
        FAIL("expected parse error");
    } catch (const TelemetryError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_report("INT flow=10.0.0.1:1-10.0.0.2:2/6 seq=1 size=10 hops=[] drop=-"), TelemetryError);
    CHECK_THROWS_AS(parse_report("INT flow=300.0.0.1:1-10.0.0.2:2/6 seq=1 size=10 hops=[1:1:2:0:3:200:0.5000:10] drop=-"),
                    TelemetryError);
}

TEST_CASE("trace round trip over random reports") {
    CounterRng rng(11);
    std::vector<IntReport> rs;
    for (int i = 0; i < 500; ++i) rs.push_back(random_report(rng, i));
    std::stringstream ss;
    write_trace(ss, rs);
    const auto back = read_trace(ss);
    CHECK(back == rs);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        CHECK(path_latency(back[i]) == path_latency(rs[i]));
    }
}

TEST_CASE("dedup removes exact duplicates") {
    const auto r = report(kFlow, 7, {hop(1, 1, 0)});
    const std::vector<IntReport> in{r, r};
    const auto out = dedup_coalesce(in, 16);
    CHECK(out.reports.size() == 1);
    CHECK(out.stats.duplicates_removed == 1);
}

TEST_CASE("dedup coalesces differing hop sets by union") {
    const auto a = hop(1, 10, 1);
    const auto b = hop(2, 20, 2);
    const auto c = hop(3, 30, 3);
    const std::vector<IntReport> in{report(kFlow, 7, {a, b}), report(kFlow, 7, {b, c})};
    const auto out = dedup_coalesce(in, 16);
    REQUIRE(out.reports.size() == 1);
    CHECK(out.reports[0].hops == std::vector<HopMetadata>{a, b, c});
    CHECK(out.stats.coalesced == 1);
}

TEST_CASE("distinct seqs pass through unchanged") {
    std::vector<IntReport> in;
    for (int i = 1; i <= 100; ++i) in.push_back(report(kFlow, i, {hop(1, i, 0)}));
    const auto out = dedup_coalesce(in, 16);
    CHECK(out.reports == in);
    CHECK(out.stats.reports_out == 100);
}

TEST_CASE("dedup properties over random duplicate injection") {
    CounterRng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<IntReport> base;
        for (int i = 0; i < 60; ++i) {
            auto r = report(FlowKey{static_cast<std::uint32_t>(rng.below(3)), 1, 1, 1, 6}, rng.below(20),
                            {hop(static_cast<std::uint32_t>(rng.below(4)), rng.below(50), rng.below(100))});
            base.push_back(r);
            if (rng.chance(0.3)) base.push_back(r);
        }
        const std::size_t window = rng.chance(0.5) ? 1024 : 1 + rng.below(64);
        const auto once = dedup_coalesce(base, window);
        const auto& s = once.stats;
        CHECK(s.reports_in == base.size());
        CHECK(s.reports_out == s.reports_in - s.duplicates_removed - s.coalesced);
        CHECK(once.reports.size() == s.reports_out);
        if (window >= base.size()) {
            const auto twice = dedup_coalesce(once.reports, window);
            CHECK(twice.reports == once.reports);
            // Nothing left the window, so every key is unique in the output.
            std::set<std::pair<FlowKey, std::uint64_t>> keys;
            for (const auto& r : once.reports) CHECK(keys.emplace(r.flow, r.seq).second);
        }
    }
}
