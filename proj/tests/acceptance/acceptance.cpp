// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "raft_chaos.hpp"

#include "reflex/classifier/synth.hpp"
#include "reflex/monitors/budget.hpp"
#include "reflex/monitors/path_latency.hpp"
#include "reflex/reflexplane/plane.hpp"
#include "reflex/scenario/experiments.hpp"
#include "reflex/scenario/fixtures.hpp"
#include "reflex/telemetry/int_report.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <random>

using namespace reflex;
using sim::VirtualTime;

namespace {

// Tolerances.
constexpr VirtualTime kZeroServiceSw1 = 348;
constexpr VirtualTime kZeroServiceSw300 = 1544;
constexpr double kSwitchDeltaNs = 1200.0;
constexpr double kDeltaTolNs = 5.0;
constexpr double kMedianSw1Ns = 1880.0;
constexpr double kMedianSw300Ns = 3080.0;
constexpr double kMedianTolNs = 20.0;
constexpr VirtualTime kKneeP99BoundNs = 4500;
constexpr double kKneeLowMaxRps = 450'000;
constexpr double kKneeHighMinRps = 510'000;
constexpr VirtualTime kOverloadP99Ns = 10'000;
constexpr std::size_t kSweepRequests = 10'000;
constexpr std::size_t kSafetyRuns = 200;
constexpr std::size_t kClassifyRules = 10'000;
constexpr std::size_t kClassifyKeys = 100'000;
constexpr std::uint64_t kReportsAt100G = 8'333'333;
constexpr std::uint64_t kBudgetCycles = 384;
constexpr double kBudgetNs = 120.0;
constexpr double kBudgetNsTol = 0.5;
constexpr std::uint64_t kMonitorRate50ns = 20'000'000;
constexpr VirtualTime kDirectWithMac = 130;
constexpr VirtualTime kDirectNoMac = 78;
constexpr std::size_t kDetectorReports = 10'000;
constexpr std::uint32_t kDetectorFlows = 100;
constexpr VirtualTime kE2eBoundNs = 10'000;
constexpr double kBottleneckTol = 0.01;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Criterion = std::function<Outcome()>;

raft::ClusterConfig star(VirtualTime switch_latency, raft::ServiceProfile service) {
    raft::ClusterConfig c;
    c.replicas = 3;
    c.link_latency = 43;
    c.switch_latency = switch_latency;
    c.service = service;
    return c;
}

Outcome raft_decomposition() {
    const auto a = scenario::raft_isolated_latency(star(1, raft::ServiceProfile::zero()), 200);
    const auto b = scenario::raft_isolated_latency(star(300, raft::ServiceProfile::zero()), 200);
    // mean == max means every write took exactly that long.
    const bool exact = a.mean_ns == kZeroServiceSw1 && a.max_ns == kZeroServiceSw1 && b.mean_ns == kZeroServiceSw300 &&
                       b.max_ns == kZeroServiceSw300;
    const double delta = static_cast<double>(b.p50_ns) - static_cast<double>(a.p50_ns);
    return {exact && std::abs(delta - kSwitchDeltaNs) <= kDeltaTolNs,
            fmt::format("sw1 mean {} max {} ns, sw300 mean {} max {} ns, delta {} ns", a.mean_ns, a.max_ns, b.mean_ns,
                        b.max_ns, delta)};
}

Outcome raft_calibration() {
    const auto a = scenario::raft_isolated_latency(star(1, raft::ServiceProfile::calibrated()), 1000);
    const auto b = scenario::raft_isolated_latency(star(300, raft::ServiceProfile::calibrated()), 1000);
    const bool ok = std::abs(static_cast<double>(a.p50_ns) - kMedianSw1Ns) <= kMedianTolNs &&
                    std::abs(static_cast<double>(b.p50_ns) - kMedianSw300Ns) <= kMedianTolNs;
    return {ok, fmt::format("median {} ns (1 ns switch), {} ns (300 ns switch), service 1000/32/500 ns", a.p50_ns, b.p50_ns)};
}

Outcome raft_knee() {
    const auto cfg = star(1, raft::ServiceProfile::calibrated());
    bool ok = cfg.service.client_write + 2 * cfg.service.append_reply == 2000;
    std::string detail;
    for (double rate : {318'000.0, 400'000.0, 450'000.0, 480'000.0, 500'000.0, 507'000.0, 510'000.0, 550'000.0}) {
        const auto pt = scenario::raft_load_point(cfg, rate, kSweepRequests);
        if (rate <= kKneeLowMaxRps) ok = ok && pt.stats.drop_count == 0 && pt.stats.p99_ns <= kKneeP99BoundNs;
        if (rate >= kKneeHighMinRps) ok = ok && (pt.stats.drop_count > 0 || pt.stats.p99_ns > kOverloadP99Ns);
        detail += fmt::format("{}k:p99={}/drops={} ", rate / 1000, pt.stats.p99_ns, pt.stats.drop_count);
    }
    return {ok, detail};
}

Outcome raft_safety() {
    std::size_t violations = 0, leaders = 0, crashes = 0, committed = 0;
    std::string failing;
    for (std::uint64_t seed = 1; seed <= kSafetyRuns; ++seed) {
        const auto r = testing::raft_chaos_run(seed);
        violations += r.violations.size();
        leaders += r.leaders;
        crashes += r.crashes;
        committed += r.committed;
        if (!r.violations.empty()) {
            failing += fmt::format(" [{}: {} {}]", seed, raft::to_string(r.violations[0].kind), r.violations[0].detail);
        }
    }
    return {violations == 0, fmt::format("{} runs, seeds 1..{}, {} leaders, {} crashes, {} commits, {} violations{}",
                                         kSafetyRuns, kSafetyRuns, leaders, crashes, committed, violations, failing)};
}

Outcome classifier_equivalence() {
    struct Set {
        std::uint64_t seed;
        double extension;
    };
    std::size_t total_keys = 0, mismatches = 0;
    std::string detail;
    for (const auto& s : {Set{101, 0.0}, Set{202, 0.3}, Set{303, 0.7}}) {
        classify::SynthParams p;
        p.rules = kClassifyRules;
        p.seed = s.seed;
        p.extension_fraction = s.extension;
        const auto rs = classify::synth_acl(p);
        const auto keys = classify::synth_keys(*rs, kClassifyKeys, s.seed + 1);
        const auto tree = classify::ClassifierEngine::build(rs, scenario::engine_config(scenario::EngineKind::Tree));
        const auto learned = classify::ClassifierEngine::build(rs, scenario::engine_config(scenario::EngineKind::Learned));
        std::size_t bad = 0;
        for (const auto& k : keys) {
            const auto want = classify::classify_linear(*rs, k);
            bad += tree->classify(k) != want;
            bad += learned->classify(k) != want;
        }
        total_keys += keys.size();
        mismatches += bad;
        detail += fmt::format("seed {} ext {}: {} mismatches; ", s.seed, s.extension, bad);
    }
    return {mismatches == 0 && total_keys >= 3 * kClassifyKeys,
            fmt::format("{} rulesets x {} rules x {} keys, tree+learned: {}", 3, kClassifyRules, kClassifyKeys, detail)};
}

Outcome budget_arithmetic() {
    const auto rate = telemetry::report_rate_for_link(100'000'000'000ULL, 1500);
    const auto budget = monitor::monitor_budget(8.33e6, 3.2e9);
    const auto probe = scenario::monitor_capacity(50);
    const bool ok = rate == kReportsAt100G && budget.cycles == kBudgetCycles &&
                    std::abs(budget.ns_per_report - kBudgetNs) <= kBudgetNsTol && probe.max_rate_rps == kMonitorRate50ns &&
                    probe.drops_below > 0;
    return {ok, fmt::format("{} reports/s at 100G/1500B; {} cycles, {:.2f} ns per report; 50 ns monitor sustains {} "
                            "reports/s, {} drops one ns faster",
                            rate, budget.cycles, budget.ns_per_report, probe.max_rate_rps, probe.drops_below)};
}

plane::PlaneConfig anomaly_plane(std::string_view preset) {
    plane::PlaneConfig c;
    c.apply_preset(preset);
    monitor::MonitorSpec m;
    m.id = "pl";
    m.path_latency.threshold_ns = 500;
    c.monitors = {m};
    c.elements = scenario::default_element_ports();
    return c;
}

Outcome direct_latency() {
    std::vector<VirtualTime> got;
    for (VirtualTime mac : {26u, 0u}) {
        auto cfg = anomaly_plane("nanopu");
        cfg.command_path = plane::CommandPath::Direct;
        cfg.monitor_service_ns = 78;
        cfg.mac_serial_ns = mac;
        auto p = plane::Plane::build(cfg);
        p->start();
        const auto r = p->inject_reports(scenario::make_anomaly_trace({}).reports, 1e6);
        got.push_back(r.traces.size() == 1 ? r.traces[0].direct() : 0);
    }
    return {got[0] == kDirectWithMac && got[1] == kDirectNoMac,
            fmt::format("{} ns with 26 ns MAC/serial, {} ns without", got[0], got[1])};
}

// From-scratch moving-average recomputation over each flow's stored window.
std::vector<bool> brute_detector(const std::vector<telemetry::IntReport>& reports, VirtualTime threshold) {
    std::map<telemetry::FlowKey, std::deque<VirtualTime>> windows;
    std::vector<bool> fired;
    for (const auto& r : reports) {
        VirtualTime lat = 0;
        for (const auto& h : r.hops) lat += h.hop_latency_ns;
        auto& w = windows[r.flow];
        bool fire = false;
        if (w.size() == monitor::kLatencyWindow) {
            long double sum = 0;
            for (auto x : w) sum += x;
            fire = static_cast<long double>(lat) > sum / static_cast<long double>(w.size()) + threshold;
        }
        if (fire) w.clear();
        w.push_back(lat);
        if (w.size() > monitor::kLatencyWindow) w.pop_front();
        fired.push_back(fire);
    }
    return fired;
}

Outcome detector_oracle() {
    std::size_t mismatched = 0, firings = 0;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        std::mt19937_64 rng(seed);
        std::vector<telemetry::IntReport> reports;
        for (std::size_t i = 0; i < kDetectorReports; ++i) {
            telemetry::IntReport r;
            const auto f = static_cast<std::uint32_t>(rng() % kDetectorFlows);
            r.flow = {0x0A000000u + f, 0x0A010000u, static_cast<std::uint16_t>(1000 + f), 80, 6};
            r.seq = i;
            r.pkt_size_bytes = 1500;
            for (std::uint32_t h = 0; h < 2; ++h) {
                telemetry::HopMetadata hop;
                hop.switch_id = h + 1;
                hop.egress_port = 1;
                hop.hop_latency_ns = 400 + rng() % 300 + (rng() % 30 == 0 ? 500 + rng() % 1500 : 0);
                r.hops.push_back(hop);
            }
            reports.push_back(std::move(r));
        }
        monitor::MonitorSpec spec;
        spec.id = "pl";
        spec.path_latency.threshold_ns = 400;
        const auto det = scenario::run_detectors(std::span(&spec, 1), reports, scenario::default_element_ports());
        std::vector<bool> got(reports.size(), false);
        for (auto idx : det.report_index) got[idx] = true;
        const auto want = brute_detector(reports, 400);
        for (std::size_t i = 0; i < reports.size(); ++i) {
            mismatched += got[i] != want[i];
            firings += want[i];
        }
    }
    // Planted fixture, through the full simulated plane.
    const auto trace = scenario::make_anomaly_trace({});
    auto p = plane::Plane::build(anomaly_plane("nanopu"));
    p->start();
    const auto r = p->inject_reports(trace.reports, 1e6);
    const auto observed = scenario::observed_spikes(r.commands, scenario::command_report_indices(r));
    const bool fixture_ok = observed == trace.spikes;
    return {mismatched == 0 && firings > 0 && fixture_ok,
            fmt::format("5 streams x {} reports over {} flows: {} firings, {} mismatches; fixture {} of {} truth commands",
                        kDetectorReports, kDetectorFlows, firings, mismatched, fixture_ok ? trace.spikes.size() : 0,
                        trace.spikes.size())};
}

Outcome end_to_end() {
    const auto cfg = anomaly_plane("nanopu");
    const auto oracle = plane::analytic_e2e_latency(cfg);
    auto once = [&] {
        auto p = plane::Plane::build(cfg);
        p->start();
        return p->inject_reports(scenario::make_anomaly_trace({}).reports, 1e6);
    };
    const auto a = once();
    const auto b = once();
    if (a.traces.size() != 1) return {false, fmt::format("{} commands instead of 1", a.traces.size())};
    const auto e2e = a.traces[0].e2e();
    return {e2e == oracle && e2e < kE2eBoundNs && a.traces == b.traces,
            fmt::format("measured {} ns, analytic {} ns, repeat identical: {}", e2e, oracle, a.traces == b.traces)};
}

Outcome bottleneck() {
    bool ok = true;
    std::string detail;
    for (VirtualTime s : {20u, 50u, 100u, 200u, 500u}) {
        auto cfg = anomaly_plane("zero");
        cfg.classifier_service_ns = s;
        cfg.monitor_service_ns = 50;
        const double want = std::min(1e9 / static_cast<double>(s), 1e9 / 50.0);
        const double got = scenario::plane_throughput(cfg, 4000);
        const double err = std::abs(got - want) / want;
        ok = ok && err <= kBottleneckTol;
        detail += fmt::format("{}ns:{:.0f}/s ({:.3f}%) ", s, got, err * 100);
    }
    return {ok, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, Criterion>> criteria{
        {"raft latency decomposition", raft_decomposition},
        {"raft median calibration", raft_calibration},
        {"raft load sweep knee", raft_knee},
        {"raft safety suite", raft_safety},
        {"classifier equivalence", classifier_equivalence},
        {"telemetry budget arithmetic", budget_arithmetic},
        {"direct reflex latency", direct_latency},
        {"path-latency detector oracle", detector_oracle},
        {"end-to-end reflex", end_to_end},
        {"bottleneck law", bottleneck},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        fmt::print("{} {:2} {}: {} ({:.1f}s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
