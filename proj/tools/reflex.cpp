#include "reflex/classifier/dispatch.hpp"
#include "reflex/classifier/rule_parser.hpp"
#include "reflex/classifier/synth.hpp"
#include "reflex/scenario/experiments.hpp"
#include "reflex/telemetry/trace_format.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace reflex;
using namespace reflex::scenario;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;

struct Common {
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::optional<std::string> out;
    bool trace_dump = false;

    void add_to(CLI::App& app, bool with_trace_dump = true) {
        app.add_option("--seed", seed, "Master seed for every random stream");
        app.add_option("--set", sets, "Override a config key, e.g. raft.switch_latency_ns=1")->take_all();
        app.add_option("--out", out, "Output directory");
        if (with_trace_dump) {
            app.add_flag("--trace-dump", trace_dump, "Write reflex traces as JSON lines");
        }
    }

    std::vector<std::string> overrides(std::vector<std::string> base = {}) const {
        base.insert(base.end(), sets.begin(), sets.end());
        if (seed) {
            base.push_back("seed=" + std::to_string(*seed));
        }
        return base;
    }
};

int run_config(const ScenarioConfig& cfg, const Common& common) {
    RunOptions opt;
    opt.out_dir = common.out;
    opt.trace_dump = common.trace_dump;
    const auto outcome = run_scenario(cfg, opt, std::cout);
    std::cout << "wrote " << outcome.csv_path << "\n";
    for (const auto& f : outcome.extra_files) {
        std::cout << "wrote " << f << "\n";
    }
    return kExitOk;
}

const char* const kBenchRaftBase = R"(name: bench_raft
experiments: [raft_latency, raft_sweep]
)";

const char* const kBenchMonitorBase = R"(name: bench_monitor
experiments: [monitor]
)";

int bench_classify_cmd(const Common& common, const std::optional<std::string>& rules, std::size_t synth,
                       const std::optional<std::string>& trace, std::size_t keys, const std::string& engine_name) {
    const auto engine = parse_engine_kind(engine_name);
    if (!engine) {
        std::cerr << "error: --engine must be linear, tree or learned\n";
        return kExitConfig;
    }
    const std::uint64_t seed = common.seed.value_or(1);
    std::shared_ptr<const classify::RuleSet> rs;
    try {
        if (rules) {
            rs = classify::read_ruleset_file(*rules);
        } else {
            classify::SynthParams sp;
            sp.rules = synth;
            sp.seed = seed;
            rs = classify::synth_acl(sp);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: ruleset " << rules.value_or("(synthetic)") << ": " << e.what() << "\n";
        return kExitConfig;
    }
    std::vector<classify::PacketKey> key_list;
    if (trace) {
        try {
            for (const auto& r : telemetry::read_trace_file(*trace)) {
                for (auto& k : classify::report_keys(r)) {
                    key_list.push_back(std::move(k));
                }
            }
        } catch (const std::exception& e) {
            std::cerr << "error: trace " << *trace << ": " << e.what() << "\n";
            return kExitConfig;
        }
    } else {
        key_list = classify::synth_keys(*rs, keys, sim::derive_seed(seed, "scenario/keys"));
    }
    const auto res = bench_classify(rs, key_list, *engine);

    ResultRow row;
    row.scenario = "bench_classify";
    row.experiment = "classify/" + engine_name;
    row.count = res.keys;
    row.drops = res.mismatches;
    const fs::path dir = common.out.value_or("out");
    write_file_atomic((dir / "bench_classify.csv").string(), format_csv(std::span(&row, 1)));
    std::string hist = "rule_id,count\n";
    for (const auto& [rule, n] : res.histogram) {
        hist += fmt::format("{},{}\n", rule, n);
    }
    write_file_atomic((dir / "bench_classify_histogram.csv").string(), hist);
    std::cout << fmt::format("{} engine: {} rules, {} keys, {} distinct decisions, mismatches={}\n", engine_name,
                             rs->size(), res.keys, res.histogram.size(), res.mismatches);
    return res.mismatches == 0 ? kExitOk : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflex plane simulator and benchmarks"};
    app.require_subcommand(1);

    Common common;

    auto* run = app.add_subcommand("run", "Run the experiments named in a scenario file");
    std::string config_path;
    run->add_option("config", config_path, "Scenario YAML file")->required();
    common.add_to(*run);

    auto* bc = app.add_subcommand("bench-classify", "Classify a trace and check the engine against a linear scan");
    std::optional<std::string> rules;
    std::optional<std::string> trace;
    std::size_t synth = 100;
    std::size_t keys = 10'000;
    std::string engine = "tree";
    bc->add_option("--rules", rules, "Rule file");
    bc->add_option("--synth", synth, "Synthetic ACL size when no rule file is given");
    bc->add_option("--trace", trace, "INT trace whose hops become keys");
    bc->add_option("--keys", keys, "Synthetic key count when no trace is given");
    bc->add_option("--engine", engine, "linear, tree or learned");
    common.add_to(*bc, false);

    auto* br = app.add_subcommand("bench-raft", "Raft write latency and load sweep");
    common.add_to(*br);

    auto* bm = app.add_subcommand("bench-monitor", "Run detectors over an INT trace");
    std::optional<std::string> mon_trace;
    std::optional<std::string> truth;
    bm->add_option("--trace", mon_trace, "INT trace (default: built-in planted anomaly)");
    bm->add_option("--truth", truth, "Ground-truth sidecar to check against");
    common.add_to(*bm);

    auto* fx = app.add_subcommand("fixtures", "Write rulesets, traces and scenario files");
    common.add_to(*fx, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            return run_config(load_scenario(config_path, common.overrides()), common);
        }
        if (*bc) {
            return bench_classify_cmd(common, rules, synth, trace, keys, engine);
        }
        if (*br) {
            return run_config(parse_scenario(kBenchRaftBase, common.overrides()), common);
        }
        if (*bm) {
            std::vector<std::string> base;
            if (mon_trace) base.push_back("trace=" + fs::absolute(*mon_trace).string());
            if (truth) base.push_back("truth=" + fs::absolute(*truth).string());
            return run_config(parse_scenario(kBenchMonitorBase, common.overrides(base)), common);
        }
        if (*fx) {
            for (const auto& f : write_fixtures(common.out.value_or("fixtures"), common.seed.value_or(1))) {
                std::cout << "wrote " << f << "\n";
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const plane::PlaneError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const classify::ClassifierError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const telemetry::TelemetryError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const AssertionFailure& e) {
        std::cerr << "assertion failed: " << e.what() << "\n";
        return kExitAssertion;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
