#include "reflex/scenario/experiments.hpp"

#include "reflex/classifier/dispatch.hpp"
#include "reflex/classifier/rule_parser.hpp"
#include "reflex/classifier/synth.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace reflex::scenario {

namespace fs = std::filesystem;

namespace {

raft::Payload sweep_payload(std::size_t k) {
    std::string key(raft::kKeyBytes, 'k');
    for (std::size_t i = 0; i < 8; ++i) {
        key[i] = static_cast<char>('a' + (k >> (4 * i) & 0xf));
    }
    return raft::Payload{raft::make_kv_write(key, std::string(raft::kValueBytes, 'v'))};
}

std::uint64_t total_drops(const sim::Simulator& s) {
    std::uint64_t n = 0;
    for (auto d : s.summary().drops_per_node) {
        n += d;
    }
    return n;
}

std::vector<telemetry::IntReport> load_trace(const ScenarioConfig& c) {
    if (c.trace_path) {
        return telemetry::read_trace_file(*c.trace_path);
    }
    AnomalyTraceParams p;
    p.seed = c.seed;
    return make_anomaly_trace(p, c.plane.elements).reports;
}

std::optional<std::vector<PlantedSpike>> load_truth(const ScenarioConfig& c) {
    if (c.truth_path) {
        return read_truth_file(*c.truth_path);
    }
    if (!c.trace_path) {
        AnomalyTraceParams p;
        p.seed = c.seed;
        return make_anomaly_trace(p, c.plane.elements).spikes;
    }
    return std::nullopt;
}

void check_truth(const ScenarioConfig& c, const std::vector<PlantedSpike>& got, std::ostream& log,
                 std::string_view what) {
    const auto truth = load_truth(c);
    if (!truth) {
        return;
    }
    if (got != *truth) {
        throw AssertionFailure(fmt::format("{}: detected {} reroute(s), ground truth lists {}", what, got.size(),
                                           truth->size()));
    }
    log << fmt::format("{}: {} reroute(s) match ground truth\n", what, got.size());
}

std::shared_ptr<const classify::RuleSet> scenario_ruleset(const ScenarioConfig& c) {
    if (c.ruleset_path) {
        return classify::read_ruleset_file(*c.ruleset_path);
    }
    classify::SynthParams sp;
    sp.rules = c.classify.synth_rules;
    sp.seed = c.seed;
    return classify::synth_acl(sp);
}

plane::PlaneConfig with_ruleset(const ScenarioConfig& c, plane::PlaneConfig pc) {
    if (c.ruleset_path) {
        pc.ruleset = classify::read_ruleset_file(*c.ruleset_path);
    }
    return pc;
}

std::vector<ResultRow> run_plane_experiment(const ScenarioConfig& c, plane::CommandPath path, std::ostream& log,
                                            std::ostream* trace_dump) {
    auto pc = with_ruleset(c, c.plane_config());
    pc.command_path = path;
    if (path == plane::CommandPath::Direct) {
        pc.raft_replicas = 0;
    }
    const auto reports = load_trace(c);
    auto p = plane::Plane::build(pc);
    p->start();
    const auto run = p->inject_reports(reports, c.workload.report_rate_rps);
    const char* exp = path == plane::CommandPath::Direct ? "direct" : "e2e";
    check_truth(c, observed_spikes(run.commands, command_report_indices(run)), log, exp);
    if (path == plane::CommandPath::Consensus) {
        std::size_t delivered = 0;
        for (const auto& t : run.traces) {
            delivered += t.delivered() ? 1 : 0;
        }
        if (delivered != run.traces.size()) {
            throw AssertionFailure(fmt::format("e2e: {} of {} commands reached their switch", delivered,
                                               run.traces.size()));
        }
        log << fmt::format("e2e: analytic uncontended latency {} ns\n", plane::analytic_e2e_latency(pc));
    }
    if (trace_dump != nullptr) {
        p->dump_traces(*trace_dump);
    }
    auto stats = run.stages.at(exp);
    stats.drop_count = run.total_drops();
    return {make_row(c.name, exp, c.workload.report_rate_rps, stats)};
}

}  // namespace

sim::LatencyStats raft_isolated_latency(const raft::ClusterConfig& config, std::size_t requests, VirtualTime idle_gap) {
    raft::RaftCluster cluster(config);
    cluster.wait_for_leader();
    std::vector<VirtualTime> lat;
    lat.reserve(requests);
    for (std::size_t i = 0; i < requests; ++i) {
        cluster.run_for(idle_gap);
        lat.push_back(cluster.client_write(sweep_payload(i)).latency);
    }
    return sim::summarize(lat, total_drops(cluster.sim()));
}

SweepPoint raft_load_point(raft::ClusterConfig config, double rate_rps, std::size_t requests) {
    config.client_retries = false;
    raft::RaftCluster cluster(config);
    cluster.wait_for_leader();
    const auto interval = static_cast<VirtualTime>(std::llround(1e9 / rate_rps));
    const VirtualTime start = cluster.sim().now() + 1000;
    cluster.client(0).schedule_open_loop(cluster.sim(), start, interval, requests, sweep_payload);
    cluster.run_for(requests * interval + 2'000'000);
    SweepPoint pt;
    pt.rate_rps = rate_rps;
    pt.requests = requests;
    pt.stats = cluster.sim().stats().summary("raft.write");
    pt.stats.drop_count = total_drops(cluster.sim());
    pt.unfinished = cluster.client(0).pending();
    return pt;
}

classify::EngineConfig engine_config(EngineKind kind) {
    classify::EngineConfig e;
    e.use_learned_index = kind == EngineKind::Learned;
    return e;
}

ClassifyResult bench_classify(std::shared_ptr<const classify::RuleSet> ruleset,
                              std::span<const classify::PacketKey> keys, EngineKind kind) {
    ClassifyResult out;
    out.keys = keys.size();
    std::shared_ptr<const classify::ClassifierEngine> engine;
    if (kind != EngineKind::Linear) {
        engine = classify::ClassifierEngine::build(ruleset, engine_config(kind));
    }
    for (const auto& key : keys) {
        const auto oracle = classify::classify_linear(*ruleset, key);
        const auto got = engine ? engine->classify(key) : oracle;
        if (got != oracle) {
            ++out.mismatches;
        }
        ++out.histogram[got ? static_cast<std::int64_t>(got->rule_id) : -1];
    }
    return out;
}

Detection run_detectors(std::span<const monitor::MonitorSpec> specs, std::span<const telemetry::IntReport> reports,
                        const ElementPorts& ports) {
    monitor::TopologySnapshot topo;
    for (const auto& [sw, list] : ports) {
        for (auto port : list) {
            topo.add_port(sw, port);
        }
    }
    std::vector<std::unique_ptr<monitor::Monitor>> mons;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        mons.push_back(monitor::make_monitor(specs[i], i, topo));
    }
    Detection out;
    const auto full = classify::full_projection();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto projected = classify::project(reports[i], full);
        const VirtualTime now = reports[i].hops.empty() ? 0 : reports[i].hops.back().timestamp_ns;
        for (auto& m : mons) {
            for (auto& cmd : m->observe(projected, now)) {
                out.commands.push_back(std::move(cmd));
                out.report_index.push_back(i);
            }
        }
    }
    return out;
}

std::vector<std::size_t> command_report_indices(const plane::RunReport& report) {
    std::vector<std::size_t> out;
    for (const auto& t : report.traces) {
        out.push_back(static_cast<std::size_t>(t.report_id - 1));
    }
    return out;
}

double plane_throughput(plane::PlaneConfig config, std::size_t reports) {
    config.command_path = plane::CommandPath::Direct;
    config.raft_replicas = 0;
    config.rx_queue_capacity = reports + 16;
    AnomalyTraceParams ap;
    ap.flows = 16;
    ap.reports_per_flow = (reports + ap.flows - 1) / ap.flows;
    ap.spike_ns = 0;
    ap.spike_report = std::min<std::size_t>(10, ap.reports_per_flow - 1);
    ap.seed = config.seed;
    auto stream = make_anomaly_trace(ap).reports;
    stream.resize(reports);
    auto p = plane::Plane::build(config);
    p->start();
    const auto run = p->inject_reports(stream, 1e9, 0, 10 * reports * 1000);
    const auto& done = p->recorder().monitor_completions;
    if (run.total_drops() != 0 || done.size() != reports) {
        throw AssertionFailure(fmt::format("throughput probe lost reports: {} of {} completed", done.size(), reports));
    }
    const std::size_t a = reports / 4;
    const std::size_t b = reports - reports / 4 - 1;
    return static_cast<double>(b - a) * 1e9 / static_cast<double>(done[b] - done[a]);
}

CapacityProbe monitor_capacity(VirtualTime service_ns, std::size_t reports, std::size_t rx_capacity) {
    plane::PlaneConfig base;
    base.apply_preset("zero");
    base.link_latency = 0;
    base.switch_latency = 0;
    base.monitor_service_ns = service_ns;
    base.command_path = plane::CommandPath::Direct;
    base.raft_replicas = 0;
    base.rx_queue_capacity = rx_capacity;
    monitor::MonitorSpec m;
    m.id = "probe";
    m.kind = monitor::MonitorKind::Threshold;
    m.field = "queue_depth";
    m.limit = 1e9;
    base.monitors = {m};
    AnomalyTraceParams ap;
    ap.flows = 16;
    ap.reports_per_flow = (reports + ap.flows - 1) / ap.flows;
    ap.spike_ns = 0;
    auto stream = make_anomaly_trace(ap).reports;
    stream.resize(reports);

    auto drops_at = [&](VirtualTime interval) {
        auto p = plane::Plane::build(base);
        const auto run = p->inject_reports(stream, 1e9 / static_cast<double>(interval), 0, 1'000'000);
        return run.drops_per_node.at("mon-probe");
    };
    CapacityProbe out;
    VirtualTime interval = std::max<VirtualTime>(1, 2 * service_ns);
    if (drops_at(interval) != 0) {
        throw AssertionFailure("monitor drops even at half its nominal capacity");
    }
    while (interval > 1) {
        const auto d = drops_at(interval - 1);
        if (d != 0) {
            out.drops_below = d;
            break;
        }
        --interval;
    }
    out.min_interval_ns = interval;
    out.max_rate_rps = 1'000'000'000ULL / interval;
    return out;
}

std::vector<ResultRow> run_experiment(const ScenarioConfig& c, Experiment e, std::ostream& log,
                                      std::ostream* trace_dump) {
    const std::string exp(to_string(e));
    switch (e) {
        case Experiment::RaftLatency: {
            const auto s = raft_isolated_latency(c.cluster_config(), c.raft.requests, c.raft.idle_gap_ns);
            log << fmt::format("raft_latency: analytic {} ns\n",
                               raft::analytic_write_latency(c.raft.link_latency_ns, c.raft.switch_latency_ns,
                                                            c.raft.mac_serial_ns, c.raft.service));
            return {make_row(c.name, exp, 0, s)};
        }
        case Experiment::RaftSweep: {
            std::vector<ResultRow> rows;
            for (double rate : c.workload.rates_rps) {
                std::size_t n = c.workload.requests;
                if (c.workload.duration_ns) {
                    n = std::max<std::size_t>(1, static_cast<std::size_t>(rate * 1e-9 * *c.workload.duration_ns));
                }
                const auto pt = raft_load_point(c.cluster_config(), rate, n);
                rows.push_back(make_row(c.name, exp, rate, pt.stats));
            }
            return rows;
        }
        case Experiment::Classify: {
            const auto rs = scenario_ruleset(c);
            std::vector<classify::PacketKey> keys;
            if (c.trace_path) {
                for (const auto& r : telemetry::read_trace_file(*c.trace_path)) {
                    for (auto& k : classify::report_keys(r)) {
                        keys.push_back(std::move(k));
                    }
                }
            } else {
                keys = classify::synth_keys(*rs, c.classify.keys, sim::derive_seed(c.seed, "scenario/keys"));
            }
            const auto res = bench_classify(rs, keys, c.classify.engine);
            log << fmt::format("classify: {} engine, {} rules, {} keys, {} mismatches, {} distinct decisions\n",
                               to_string(c.classify.engine), rs->size(), res.keys, res.mismatches,
                               res.histogram.size());
            if (res.mismatches != 0) {
                throw AssertionFailure(fmt::format("classify: {} mismatches against the linear scan", res.mismatches));
            }
            ResultRow row;
            row.scenario = c.name;
            row.experiment = exp + "/" + std::string(to_string(c.classify.engine));
            row.count = res.keys;
            row.drops = res.mismatches;
            return {row};
        }
        case Experiment::Monitor: {
            const auto reports = load_trace(c);
            const auto det = run_detectors(c.monitors, reports, c.plane.elements);
            check_truth(c, observed_spikes(det.commands, det.report_index), log, "monitor");
            ResultRow row;
            row.scenario = c.name;
            row.experiment = exp;
            row.count = det.commands.size();
            return {row};
        }
        case Experiment::EndToEnd:
            return run_plane_experiment(c, plane::CommandPath::Consensus, log, trace_dump);
        case Experiment::Direct:
            return run_plane_experiment(c, plane::CommandPath::Direct, log, trace_dump);
        case Experiment::Bottleneck: {
            std::vector<ResultRow> rows;
            auto pc = c.plane_config();
            pc.monitor_service_ns = c.bottleneck.monitor_service_ns;
            for (VirtualTime s : c.bottleneck.classifier_service_ns) {
                pc.classifier_service_ns = s;
                const double tput = plane_throughput(pc, c.bottleneck.reports);
                const double expect = 1e9 / static_cast<double>(std::max({s, pc.monitor_service_ns, VirtualTime{1}}));
                log << fmt::format("bottleneck: classify {} ns, monitor {} ns -> {:.0f} reports/s (law {:.0f})\n", s,
                                   pc.monitor_service_ns, tput, expect);
                ResultRow row;
                row.scenario = c.name;
                row.experiment = fmt::format("{}/classify_{}ns", exp, s);
                row.load_rps = tput;
                row.count = c.bottleneck.reports;
                rows.push_back(row);
            }
            return rows;
        }
        case Experiment::Capacity: {
            const auto probe = monitor_capacity(c.bottleneck.monitor_service_ns);
            log << fmt::format("capacity: {} ns/report sustains {} reports/s; {} drops one ns faster\n",
                               c.bottleneck.monitor_service_ns, probe.max_rate_rps, probe.drops_below);
            ResultRow row;
            row.scenario = c.name;
            row.experiment = exp;
            row.load_rps = static_cast<double>(probe.max_rate_rps);
            row.drops = probe.drops_below;
            return {row};
        }
    }
    return {};
}

RunOutcome run_scenario(const ScenarioConfig& c, const RunOptions& options, std::ostream& log) {
    RunOutcome out;
    const fs::path dir = options.out_dir.value_or(c.output.dir);
    const bool dump = options.trace_dump || c.output.trace_dump;
    std::ostringstream traces;
    for (auto e : c.experiments) {
        auto rows = run_experiment(c, e, log, dump ? &traces : nullptr);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    out.csv_path = (dir / c.output.csv).string();
    write_file_atomic(out.csv_path, format_csv(out.rows));
    if (dump) {
        const auto path = (dir / (c.name + ".traces.jsonl")).string();
        write_file_atomic(path, traces.str());
        out.extra_files.push_back(path);
    }
    log << summary_table(out.rows);
    return out;
}

std::string summary_table(std::span<const ResultRow> rows) {
    std::string out = fmt::format("{:<18} {:<26} {:>12} {:>7} {:>6} {:>10} {:>9} {:>9} {:>9}\n", "scenario",
                                  "experiment", "load_rps", "count", "drops", "mean_ns", "p50_ns", "p99_ns", "max_ns");
    for (const auto& r : rows) {
        out += fmt::format("{:<18} {:<26} {:>12.0f} {:>7} {:>6} {:>10.1f} {:>9} {:>9} {:>9}\n", r.scenario,
                           r.experiment, r.load_rps, r.count, r.drops, r.mean_ns, r.p50_ns, r.p99_ns, r.max_ns);
    }
    return out;
}

}  // namespace reflex::scenario
