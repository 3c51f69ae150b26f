#include "reflex/classifier/rule_parser.hpp"
#include "reflex/scenario/config.hpp"
#include "reflex/scenario/csv.hpp"
#include "reflex/scenario/experiments.hpp"
#include "reflex/scenario/fixtures.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace reflex;
using namespace reflex::scenario;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("reflex_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult cli(const std::string& args, const fs::path& cwd) {
    const auto log = cwd / "cli.log";
    const std::string cmd = "cd '" + cwd.string() + "' && '" REFLEX_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
}

ConfigError config_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_scenario(text, overrides);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected a ConfigError");
    return ConfigError("", 0, "");
}

const char* const kMinimal = "name: t\nexperiments: [raft_latency]\n";

}  // namespace

TEST_CASE("config: defaults") {
    auto c = parse_scenario(kMinimal);
    CHECK(c.name == "t");
    CHECK(c.seed == 1);
    REQUIRE(c.experiments.size() == 1);
    CHECK(c.experiments[0] == Experiment::RaftLatency);
    CHECK(c.raft.replicas == 3);
    CHECK(c.raft.switch_latency_ns == 1);
    CHECK(c.raft.service.critical_path() == 1532);
    REQUIRE(c.monitors.size() == 1);
    CHECK(c.monitors[0].kind == monitor::MonitorKind::PathLatency);
    CHECK(c.workload.rates_rps.front() == 318'000);
    CHECK(c.output.csv == "results.csv");

    auto cc = c.cluster_config();
    CHECK(cc.replicas == 3);
    CHECK(cc.link_latency == 43);
    CHECK(cc.switch_latency == 1);
    auto pc = c.plane_config();
    CHECK(pc.monitor_service_ns == 50);
    CHECK(pc.mac_serial_ns == 26);
    CHECK(pc.switch_latency == 300);
}

TEST_CASE("config: sections and overrides") {
    const std::string text = R"(name: s
seed: 9
experiments: [e2e, direct]
topology:
  link_latency_ns: 10
  switch_latency_ns: 20
  mac_serial_ns: 0
monitors:
  - id: a
    kind: threshold
    field: link_utilization
    limit: 0.9
  - id: b
    kind: microburst
    depth_threshold_pkts: 12
    top_k: 3
raft:
  replicas: 5
  service:
    client_write_ns: 100
    append_entries_ns: 10
    append_reply_ns: 50
plane:
  preset: zero
  monitor_service_ns: 78
  classifiers: 2
  shard_mode: partition
)";
    auto c = parse_scenario(text);
    CHECK(c.seed == 9);
    CHECK(c.monitors.size() == 2);
    CHECK(c.monitors[0].limit == doctest::Approx(0.9));
    CHECK(c.monitors[1].microburst.depth_threshold_pkts == 12);
    CHECK(c.monitors[1].microburst.top_k == 3);
    CHECK(c.raft.replicas == 5);
    CHECK(c.raft.service.critical_path() == 160);
    auto pc = c.plane_config();
    CHECK(pc.monitor_service_ns == 78);
    CHECK(pc.classifier_service_ns == 0);
    CHECK(pc.mac_serial_ns == 0);
    CHECK(pc.link_latency == 10);
    CHECK(pc.classifiers == 2);
    CHECK(pc.shard_mode == classify::ShardMode::PartitionByHash);

    auto o = parse_scenario(text, {"raft.replicas=3", "topology.switch_latency_ns=300", "monitors.1.top_k=1",
                                   "workload.rates_rps=[1000, 2000]"});
    CHECK(o.raft.replicas == 3);
    CHECK(o.topology.switch_latency_ns == 300);
    CHECK(o.monitors[1].microburst.top_k == 1);
    CHECK(o.workload.rates_rps == std::vector<double>{1000, 2000});
}

TEST_CASE("config: errors carry key paths and lines") {
    auto e = config_error("name: t\nexperiments: [raft_latency]\nraft:\n  replicas: 4\n");
    CHECK(e.path() == "raft.replicas");
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);

    e = config_error("name: t\nexperiments: [raft_latency]\nraft:\n  replica: 3\n");
    CHECK(e.path() == "raft.replica");
    CHECK(e.line() == 4);

    e = config_error("experiments: [raft_latency]\n");
    CHECK(e.path() == "name");

    e = config_error("name: t\nexperiments: [warp_drive]\n");
    CHECK(e.path().rfind("experiments", 0) == 0);

    e = config_error("name: t\nexperiments: []\n");
    CHECK(e.path() == "experiments");

    e = config_error(kMinimal, {"raft.bogus=1"});
    CHECK(e.path() == "raft.bogus");
    CHECK(std::string(e.what()).find("--set") != std::string::npos);

    e = config_error(kMinimal, {"raft.replicas"});
    CHECK(std::string(e.what()).find("raft.replicas") != std::string::npos);

    e = config_error("name: t\nexperiments: [classify]\nruleset: no_such.rules\n");
    CHECK(e.path() == "ruleset");
    CHECK(std::string(e.what()).find("no_such.rules") != std::string::npos);

    CHECK_THROWS_AS(parse_scenario("name: [unclosed\n"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/dir/x.yaml"), ConfigError);
}

TEST_CASE("csv: golden format") {
    ResultRow row{"raft_sweep", "raft_sweep", 318000, 10000, 0, 1880.0, 1880, 1880, 1880};
    CHECK(format_row(row) == "raft_sweep,raft_sweep,318000.0,10000,0,1880.0,1880,1880,1880");
    ResultRow comma{"a,b", "x", 0.5, 1, 2, 3.25, 4, 5, 6};
    CHECK(format_row(comma) == "\"a,b\",x,0.5,1,2,3.2,4,5,6");
    const std::vector<ResultRow> rows{row, comma};
    const std::string text = format_csv(rows);
    CHECK(text.rfind("# reflex-results v1\nscenario,experiment,load_rps,count,drops,mean_ns,p50_ns,p99_ns,max_ns\n", 0) == 0);
    auto parsed = parse_csv(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0] == row);
    CHECK(parsed[1].scenario == "a,b");
    CHECK(parsed[1].p99_ns == 5);
    CHECK_THROWS(parse_csv("scenario,experiment\n"));
}

TEST_CASE("csv: atomic writes") {
    auto dir = scratch_dir("atomic");
    const auto target = dir / "nested" / "deeper" / "r.csv";
    write_file_atomic(target.string(), "one\n");
    write_file_atomic(target.string(), "two\n");
    CHECK(slurp(target) == "two\n");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(target.parent_path())) files += e.is_regular_file();
    CHECK(files == 1);
    // A path below a regular file cannot be created.
    CHECK_THROWS_AS(write_file_atomic((target / "x.csv").string(), "x"), std::runtime_error);
}

TEST_CASE("fixtures: deterministic and accepted by their own parsers") {
    auto a = scratch_dir("fx_a");
    auto b = scratch_dir("fx_b");
    auto files = write_fixtures(a.string(), 1);
    write_fixtures(b.string(), 1);
    REQUIRE(files.size() >= 9);
    for (const auto& f : files) {
        const auto name = fs::path(f).filename();
        CHECK(slurp(a / name) == slurp(b / name));
    }
    auto c = scratch_dir("fx_c");
    write_fixtures(c.string(), 2);
    CHECK(slurp(a / "acl_100.rules") != slurp(c / "acl_100.rules"));

    CHECK(classify::read_ruleset_file((a / "acl_100.rules").string())->size() == 100);
    auto trace = make_anomaly_trace({});
    CHECK(telemetry::read_trace_file((a / "trace_anomaly1.int").string()) == trace.reports);
    auto truth = read_truth_file((a / "trace_anomaly1.truth.json").string());
    CHECK(truth == trace.spikes);
    REQUIRE(truth.size() == 1);
    CHECK(truth[0].report_index == 407);
    CHECK(parse_truth(format_truth(truth)) == truth);

    for (const auto& [name, text] : default_scenarios()) {
        INFO(name);
        CHECK_NOTHROW(load_scenario((a / name).string()));
    }
}

TEST_CASE("anomaly fixture truth matches an independent detector pass") {
    auto trace = make_anomaly_trace({});
    monitor::MonitorSpec spec;
    spec.id = "pl";
    auto det = run_detectors(std::span(&spec, 1), trace.reports, default_element_ports());
    CHECK(observed_spikes(det.commands, det.report_index) == trace.spikes);
}

TEST_CASE("run_scenario: raft latency rows and summary") {
    auto dir = scratch_dir("run");
    auto cfg = parse_scenario("name: rl\nexperiments: [raft_latency]\nraft:\n  requests: 50\n");
    std::ostringstream log;
    auto outcome = run_scenario(cfg, {dir.string(), false}, log);
    REQUIRE(outcome.rows.size() == 1);
    CHECK(outcome.rows[0].mean_ns == 1880.0);
    CHECK(outcome.rows[0].p99_ns == 1880);
    CHECK(outcome.rows[0].count == 50);
    CHECK(parse_csv(slurp(outcome.csv_path)) == outcome.rows);
    CHECK(log.str().find("raft_latency") != std::string::npos);
}

TEST_CASE("cli: exit codes and outputs") {
    auto dir = scratch_dir("cli");
    auto r = cli("fixtures --out fx", dir);
    REQUIRE(r.code == 0);

    r = cli("run fx/raft_latency.yaml --out res --set raft.requests=20 --set raft.switch_latency_ns=300", dir);
    CHECK(r.code == 0);
    auto rows = parse_csv(slurp(dir / "res" / "raft_latency.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_ns == 3076.0);

    r = cli("run fx/raft_sweep.yaml --out res --set workload.requests=2000 --set 'workload.rates_rps=[318000,507000]'", dir);
    CHECK(r.code == 0);
    rows = parse_csv(slurp(dir / "res" / "raft_sweep.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].load_rps == 318000.0);
    CHECK(rows[1].load_rps == 507000.0);

    r = cli("run fx/anomaly1.yaml --out res", dir);
    CHECK(r.code == 0);
    r = cli("run fx/e2e.yaml --out res --trace-dump", dir);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "res" / "e2e_nanopu.traces.jsonl"));

    r = cli("run fx/classify.yaml --out res --set ruleset=missing.rules", dir);
    CHECK(r.code == 2);
    CHECK(r.output.find("missing.rules") != std::string::npos);
    r = cli("run fx/raft_latency.yaml --set raft.nonsense=1", dir);
    CHECK(r.code == 2);
    r = cli("run fx/raft_latency.yaml --set raft.replicas=2", dir);
    CHECK(r.code == 2);
    r = cli("run nowhere.yaml", dir);
    CHECK(r.code == 2);
    r = cli("frobnicate", dir);
    CHECK(r.code == 2);

    // The truth sidecar disagrees with the trace: a runtime assertion.
    std::ofstream(dir / "wrong.truth.json")
        << format_truth(std::vector<PlantedSpike>{PlantedSpike{3, telemetry::FlowKey{1, 2, 3, 4, 6}, 1, 2}});
    r = cli("bench-monitor --trace fx/trace_anomaly1.int --truth wrong.truth.json --out res", dir);
    CHECK(r.code == 3);
    r = cli("bench-monitor --trace fx/trace_anomaly1.int --truth fx/trace_anomaly1.truth.json --out res", dir);
    CHECK(r.code == 0);

    std::ofstream(dir / "plain_file") << "x";
    r = cli("fixtures --out plain_file/sub", dir);
    CHECK(r.code == 1);
}

TEST_CASE("cli: bench-classify") {
    auto dir = scratch_dir("bench");
    auto r = cli("bench-classify --synth 100 --keys 10000 --engine tree --out tree", dir);
    CHECK(r.code == 0);
    CHECK(r.output.find("mismatches=0") != std::string::npos);
    r = cli("bench-classify --synth 100 --keys 10000 --engine linear --out linear", dir);
    CHECK(r.code == 0);
    CHECK(slurp(dir / "tree" / "bench_classify_histogram.csv") == slurp(dir / "linear" / "bench_classify_histogram.csv"));
    auto rows = parse_csv(slurp(dir / "tree" / "bench_classify.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].count == 10000);
    CHECK(rows[0].drops == 0);

    std::ofstream(dir / "empty.int") << "";
    r = cli("bench-classify --synth 100 --trace empty.int --engine learned --out empty", dir);
    CHECK(r.code == 0);
    CHECK(parse_csv(slurp(dir / "empty" / "bench_classify.csv"))[0].count == 0);

    r = cli("bench-classify --rules none.rules", dir);
    CHECK(r.code == 2);
    r = cli("bench-classify --engine quantum", dir);
    CHECK(r.code == 2);
}
