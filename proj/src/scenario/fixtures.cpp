#include "reflex/scenario/fixtures.hpp"

#include "reflex/classifier/rule_parser.hpp"
#include "reflex/classifier/synth.hpp"
#include "reflex/scenario/csv.hpp"
#include "reflex/simnet/rng.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reflex::scenario {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

telemetry::FlowKey fixture_flow(std::size_t f) {
    const auto i = static_cast<std::uint32_t>(f);
    return telemetry::FlowKey{0x0a000000u | (i + 1), 0x0a010001u, static_cast<std::uint16_t>(10000 + i), 80, 6};
}

std::uint32_t smallest_other_port(const ElementPorts& ports, monitor::ElementId sw, std::uint32_t current) {
    auto it = ports.find(sw);
    std::uint32_t best = current;
    bool found = false;
    if (it != ports.end()) {
        for (auto p : it->second) {
            if (p != current && (!found || p < best)) {
                best = p;
                found = true;
            }
        }
    }
    return best;
}

const char* const kRaftLatencyYaml = R"(name: raft_latency
seed: 1
experiments: [raft_latency]
raft:
  replicas: 3
  link_latency_ns: 43
  switch_latency_ns: 1
  service: calibrated
  requests: 200
output:
  dir: out
  csv: raft_latency.csv
)";

const char* const kRaftSweepYaml = R"(name: raft_sweep
seed: 1
experiments: [raft_sweep]
raft:
  replicas: 3
  link_latency_ns: 43
  switch_latency_ns: 1
  service: calibrated
workload:
  rates_rps: [318000, 400000, 450000, 480000, 500000, 507000, 510000]
  requests: 10000
output:
  dir: out
  csv: raft_sweep.csv
)";

const char* const kClassifyYaml = R"(name: classify_acl100
seed: 1
experiments: [classify]
ruleset: acl_100.rules
monitors:
  - id: m0
    kind: path_latency
classify:
  engine: tree
  keys: 10000
output:
  dir: out
  csv: classify.csv
)";

const char* const kMonitorYaml = R"(name: anomaly1
seed: 1
experiments: [monitor, direct]
trace: trace_anomaly1.int
truth: trace_anomaly1.truth.json
monitors:
  - id: pl
    kind: path_latency
    threshold_ns: 500
plane:
  preset: nanopu
  elements:
    1: [1, 2, 3, 4]
    2: [1, 2, 3, 4]
workload:
  report_rate_rps: 1000000
output:
  dir: out
  csv: anomaly1.csv
)";

const char* const kE2eYaml = R"(name: e2e_nanopu
seed: 1
experiments: [e2e]
trace: trace_anomaly1.int
truth: trace_anomaly1.truth.json
topology:
  link_latency_ns: 43
  switch_latency_ns: 300
monitors:
  - id: pl
    kind: path_latency
    threshold_ns: 500
raft:
  replicas: 3
  service: calibrated
plane:
  preset: nanopu
workload:
  report_rate_rps: 1000000
output:
  dir: out
  csv: e2e.csv
  trace_dump: true
)";

const char* const kBottleneckYaml = R"(name: bottleneck
seed: 1
experiments: [bottleneck, capacity]
plane:
  preset: zero
bottleneck:
  classifier_service_ns: [20, 50, 100, 200, 500]
  monitor_service_ns: 50
  reports: 2000
output:
  dir: out
  csv: bottleneck.csv
)";

}  // namespace

ElementPorts default_element_ports() {
    return {{1, {1, 2, 3, 4}}, {2, {1, 2, 3, 4}}};
}

AnomalyTrace make_anomaly_trace(const AnomalyTraceParams& p, const ElementPorts& ports) {
    if (p.flows == 0 || p.spike_flow >= p.flows || p.spike_report >= p.reports_per_flow || p.spike_report < 10 ||
        p.spike_hop == 0 || p.spike_hop >= 2) {
        throw std::invalid_argument("anomaly trace parameters out of range");
    }
    auto rng = sim::CounterRng::named(p.seed, "fixtures/anomaly");
    AnomalyTrace out;
    constexpr std::uint32_t kPath[2] = {1, 2};
    constexpr std::uint32_t kEgress = 1;
    for (std::size_t k = 0; k < p.reports_per_flow; ++k) {
        for (std::size_t f = 0; f < p.flows; ++f) {
            const std::size_t index = out.reports.size();
            telemetry::IntReport r;
            r.flow = fixture_flow(f);
            r.seq = index;
            r.pkt_size_bytes = 1500;
            for (std::size_t h = 0; h < 2; ++h) {
                telemetry::HopMetadata hop;
                hop.switch_id = kPath[h];
                hop.ingress_port = 3;
                hop.egress_port = kEgress;
                hop.queue_id = 0;
                hop.queue_depth = static_cast<std::uint32_t>(rng.below(4));
                hop.hop_latency_ns = p.base_latency_ns + rng.uniform(0, p.jitter_ns);
                hop.utilization_e4 = static_cast<std::uint32_t>(rng.uniform(1000, 5000));
                hop.timestamp_ns = index * 1000 + h * 10;
                r.hops.push_back(hop);
            }
            if (f == p.spike_flow && k == p.spike_report) {
                r.hops[p.spike_hop].hop_latency_ns += p.spike_ns;
                const auto sw = r.hops[p.spike_hop - 1].switch_id;
                out.spikes.push_back(PlantedSpike{index, r.flow, sw, smallest_other_port(ports, sw, kEgress)});
            }
            out.reports.push_back(std::move(r));
        }
    }
    return out;
}

std::string format_truth(std::span<const PlantedSpike> spikes) {
    json j;
    j["spikes"] = json::array();
    for (const auto& s : spikes) {
        j["spikes"].push_back({{"report_index", s.report_index},
                               {"flow", s.flow.to_string()},
                               {"src_ip", s.flow.src_ip},
                               {"dst_ip", s.flow.dst_ip},
                               {"src_port", s.flow.src_port},
                               {"dst_port", s.flow.dst_port},
                               {"proto", s.flow.proto},
                               {"at_switch", s.at_switch},
                               {"new_egress_port", s.new_egress_port}});
    }
    return j.dump(2) + "\n";
}

std::vector<PlantedSpike> parse_truth(const std::string& text) {
    std::vector<PlantedSpike> out;
    try {
        const auto j = json::parse(text);
        for (const auto& s : j.at("spikes")) {
            PlantedSpike p;
            p.report_index = s.at("report_index").get<std::size_t>();
            p.flow.src_ip = s.at("src_ip").get<std::uint32_t>();
            p.flow.dst_ip = s.at("dst_ip").get<std::uint32_t>();
            p.flow.src_port = s.at("src_port").get<std::uint16_t>();
            p.flow.dst_port = s.at("dst_port").get<std::uint16_t>();
            p.flow.proto = s.at("proto").get<std::uint8_t>();
            p.at_switch = s.at("at_switch").get<monitor::ElementId>();
            p.new_egress_port = s.at("new_egress_port").get<std::uint32_t>();
            out.push_back(p);
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed truth file: ") + e.what());
    }
    return out;
}

std::vector<PlantedSpike> read_truth_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_truth(ss.str());
}

std::vector<PlantedSpike> observed_spikes(std::span<const monitor::ReflexCommand> commands,
                                          std::span<const std::size_t> report_index_of_command) {
    std::vector<PlantedSpike> out;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const auto* rr = std::get_if<monitor::Reroute>(&commands[i].body);
        if (rr == nullptr) {
            continue;
        }
        out.push_back(PlantedSpike{report_index_of_command[i], rr->flow, rr->at_switch, rr->new_egress_port});
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> default_scenarios() {
    return {{"raft_latency.yaml", kRaftLatencyYaml}, {"raft_sweep.yaml", kRaftSweepYaml},
            {"classify.yaml", kClassifyYaml},        {"anomaly1.yaml", kMonitorYaml},
            {"e2e.yaml", kE2eYaml},                  {"bottleneck.yaml", kBottleneckYaml}};
}

std::vector<std::string> write_fixtures(const std::string& out_dir, std::uint64_t seed) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());
    }
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& text) {
        const auto path = (fs::path(out_dir) / name).string();
        write_file_atomic(path, text);
        written.push_back(path);
    };

    classify::SynthParams sp;
    sp.rules = 100;
    sp.seed = seed;
    put("acl_100.rules", classify::format_ruleset(*classify::synth_acl(sp)));

    AnomalyTraceParams ap;
    ap.seed = seed;
    const auto trace = make_anomaly_trace(ap);
    std::ostringstream ts;
    telemetry::write_trace(ts, trace.reports);
    put("trace_anomaly1.int", ts.str());
    put("trace_anomaly1.truth.json", format_truth(trace.spikes));

    for (const auto& [name, text] : default_scenarios()) {
        put(name, text);
    }
    return written;
}

}  // namespace reflex::scenario
