#include "reflex/scenario/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace reflex::scenario {

namespace fs = std::filesystem;

namespace {

std::string describe(const std::string& path, std::size_t line, const std::string& what) {
    std::string out = path.empty() ? std::string("config") : path;
    if (line > 0) {
        out += " (line " + std::to_string(line) + ")";
    }
    return out + ": " + what;
}

constexpr std::string_view kExperimentNames[] = {"raft_latency", "raft_sweep", "classify", "monitor",
                                                 "e2e",          "direct",     "bottleneck", "capacity"};
constexpr std::string_view kEngineNames[] = {"linear", "tree", "learned"};

/// Walks one YAML mapping, remembering which keys were read so the rest can be
/// reported as unknown.
class MapReader {
public:
    MapReader(YAML::Node node, std::string path, const std::set<std::string>& overridden)
        : node_(std::move(node)), path_(std::move(path)), overridden_(overridden) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            fail(path_, node_, "expected a mapping");
        }
    }

    [[noreturn]] void fail(const std::string& path, const YAML::Node& at, const std::string& what) const {
        std::size_t line = 0;
        if (!overridden_.contains(path) && at && at.Mark().line >= 0) {
            line = static_cast<std::size_t>(at.Mark().line) + 1;
        }
        throw ConfigError(path, line, overridden_.contains(path) ? what + " (from --set)" : what);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node get(const std::string& key) {
        seen_.insert(key);
        if (!node_ || node_.IsNull()) {
            return YAML::Node(YAML::NodeType::Undefined);
        }
        // Const lookup: the non-const one inserts missing keys.
        const YAML::Node& n = node_;
        return n[key];
    }

    std::optional<std::string> str(const std::string& key) {
        auto n = get(key);
        if (!n) {
            return std::nullopt;
        }
        if (!n.IsScalar()) {
            fail(key_path(key), n, "expected a string");
        }
        return n.Scalar();
    }

    std::optional<std::uint64_t> uint(const std::string& key) {
        auto n = get(key);
        if (!n) {
            return std::nullopt;
        }
        return to_uint(key_path(key), n);
    }

    std::optional<double> real(const std::string& key) {
        auto n = get(key);
        if (!n) {
            return std::nullopt;
        }
        return to_real(key_path(key), n);
    }

    std::optional<bool> boolean(const std::string& key) {
        auto n = get(key);
        if (!n) {
            return std::nullopt;
        }
        bool v = false;
        if (!n.IsScalar() || !YAML::convert<bool>::decode(n, v)) {
            fail(key_path(key), n, "expected true or false");
        }
        return v;
    }

    std::uint64_t to_uint(const std::string& path, const YAML::Node& n) const {
        if (!n.IsScalar()) {
            fail(path, n, "expected a non-negative integer");
        }
        const std::string& s = n.Scalar();
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            fail(path, n, "expected a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    double to_real(const std::string& path, const YAML::Node& n) const {
        double v = 0;
        if (!n.IsScalar() || !YAML::convert<double>::decode(n, v) || !std::isfinite(v)) {
            fail(path, n, "expected a number");
        }
        return v;
    }

    void finish() const {
        if (!node_ || node_.IsNull()) {
            return;
        }
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.contains(key)) {
                fail(key_path(key), kv.first, "unknown key");
            }
        }
    }

    const YAML::Node& node() const noexcept { return node_; }
    YAML::Node at(const std::string& key) const {
        const YAML::Node& n = node_;
        return n && !n.IsNull() ? n[key] : YAML::Node(YAML::NodeType::Undefined);
    }
    const std::set<std::string>& overridden() const noexcept { return overridden_; }

private:
    YAML::Node node_;
    std::string path_;
    const std::set<std::string>& overridden_;
    std::set<std::string> seen_;
};

void apply_override(YAML::Node& root, const std::string& spec, std::set<std::string>& overridden) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set", 0, "expected key=value, got '" + spec + "'");
    }
    const std::string path = spec.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(spec.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError(path, 0, std::string("bad --set value: ") + e.what());
    }
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) {
            throw ConfigError(path, 0, "empty path component in --set");
        }
        parts.push_back(part);
    }
    // yaml-cpp node handles alias the tree, so walking by assignment is safe.
    YAML::Node cur = root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next;
        if (cur.IsSequence()) {
            std::size_t idx = 0;
            auto [p, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), idx);
            if (ec != std::errc() || p != parts[i].data() + parts[i].size() || idx >= cur.size()) {
                throw ConfigError(path, 0, "no list element '" + parts[i] + "'");
            }
            next = cur[idx];
        } else {
            if (!cur[parts[i]]) {
                cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
            }
            next = cur[parts[i]];
        }
        cur.reset(next);
    }
    if (cur.IsSequence()) {
        std::size_t idx = 0;
        std::from_chars(parts.back().data(), parts.back().data() + parts.back().size(), idx);
        if (idx >= cur.size()) {
            throw ConfigError(path, 0, "no list element '" + parts.back() + "'");
        }
        cur[idx] = value;
    } else {
        cur[parts.back()] = value;
    }
    overridden.insert(path);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

VirtualTime nonzero(MapReader& r, const std::string& key, VirtualTime dflt) {
    const auto v = r.uint(key);
    if (v && *v == 0) {
        r.fail(r.key_path(key), r.at(key), "must be at least 1");
    }
    return v.value_or(dflt);
}

monitor::MonitorSpec read_monitor(const YAML::Node& n, const std::string& path, const std::set<std::string>& ov) {
    MapReader r(n, path, ov);
    monitor::MonitorSpec m;
    const auto id = r.str("id");
    if (!id || id->empty()) {
        r.fail(r.key_path("id"), n, "monitor id is required");
    }
    m.id = *id;
    const auto kind = r.str("kind").value_or("path_latency");
    const auto k = monitor::parse_monitor_kind(kind);
    if (!k) {
        r.fail(r.key_path("kind"), n["kind"], "unknown monitor kind '" + kind + "'");
    }
    m.kind = *k;
    m.path_latency.threshold_ns = r.uint("threshold_ns").value_or(m.path_latency.threshold_ns);
    m.microburst.depth_threshold_pkts =
        static_cast<std::uint32_t>(r.uint("depth_threshold_pkts").value_or(m.microburst.depth_threshold_pkts));
    m.microburst.top_k = r.uint("top_k").value_or(m.microburst.top_k);
    m.microburst.window_ns = r.uint("window_ns").value_or(m.microburst.window_ns);
    m.microburst.throttle_rate_bits_per_s = r.uint("throttle_rate_bps").value_or(m.microburst.throttle_rate_bits_per_s);
    m.field = r.str("field").value_or(m.field);
    m.limit = r.real("limit").value_or(m.limit);
    r.finish();
    try {
        (void)monitor::make_monitor(m, 0);
    } catch (const monitor::MonitorError& e) {
        r.fail(path, n, e.what());
    }
    return m;
}

raft::ServiceProfile read_service(MapReader& parent) {
    auto n = parent.get("service");
    const std::string path = parent.key_path("service");
    if (!n) {
        return raft::ServiceProfile::calibrated();
    }
    if (n.IsScalar()) {
        if (n.Scalar() == "calibrated") return raft::ServiceProfile::calibrated();
        if (n.Scalar() == "zero") return raft::ServiceProfile::zero();
        parent.fail(path, n, "expected 'zero', 'calibrated' or a mapping");
    }
    MapReader r(n, path, parent.overridden());
    raft::ServiceProfile s;
    s.client_write = r.uint("client_write_ns").value_or(0);
    s.append_entries = r.uint("append_entries_ns").value_or(0);
    s.append_reply = r.uint("append_reply_ns").value_or(0);
    s.other = r.uint("other_ns").value_or(0);
    s.exponential = r.boolean("exponential").value_or(false);
    r.finish();
    return s;
}

}  // namespace

ConfigError::ConfigError(std::string path, std::size_t line, const std::string& what)
    : std::runtime_error(describe(path, line, what)), path_(std::move(path)), line_(line) {}

std::string_view to_string(Experiment e) {
    return kExperimentNames[static_cast<std::size_t>(e)];
}

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kExperimentNames); ++i) {
        if (kExperimentNames[i] == name) {
            return static_cast<Experiment>(i);
        }
    }
    return std::nullopt;
}

std::string_view to_string(EngineKind e) {
    return kEngineNames[static_cast<std::size_t>(e)];
}

std::optional<EngineKind> parse_engine_kind(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kEngineNames); ++i) {
        if (kEngineNames[i] == name) {
            return static_cast<EngineKind>(i);
        }
    }
    return std::nullopt;
}

plane::PlaneConfig ScenarioConfig::plane_config() const {
    plane::PlaneConfig c;
    c.apply_preset(plane.preset);
    c.link_latency = topology.link_latency_ns;
    c.switch_latency = topology.switch_latency_ns;
    if (topology.mac_serial_ns) c.mac_serial_ns = *topology.mac_serial_ns;
    if (plane.classifier_service_ns) c.classifier_service_ns = *plane.classifier_service_ns;
    if (plane.monitor_service_ns) c.monitor_service_ns = *plane.monitor_service_ns;
    c.classifiers = plane.classifiers;
    c.shard_mode = plane.shard_mode;
    c.monitors = monitors;
    c.raft_replicas = raft.replicas;
    c.elements = plane.elements;
    c.rx_queue_capacity = plane.rx_queue_capacity;
    c.seed = seed;
    return c;
}

raft::ClusterConfig ScenarioConfig::cluster_config() const {
    raft::ClusterConfig c;
    c.replicas = raft.replicas;
    c.link_latency = raft.link_latency_ns;
    c.switch_latency = raft.switch_latency_ns;
    c.mac_serial_ns = raft.mac_serial_ns;
    c.service = raft.service;
    c.rx_queue_capacity = raft.rx_queue_capacity;
    c.seed = seed;
    return c;
}

ScenarioConfig parse_scenario(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", static_cast<std::size_t>(e.mark.line) + 1, e.msg);
    }
    if (!root || root.IsNull()) {
        root = YAML::Node(YAML::NodeType::Map);
    }
    std::set<std::string> ov;
    for (const auto& o : overrides) {
        apply_override(root, o, ov);
    }

    ScenarioConfig cfg;
    MapReader top(root, "", ov);
    const auto name = top.str("name");
    if (!name || name->empty()) {
        top.fail("name", root, "scenario name is required");
    }
    cfg.name = *name;
    cfg.seed = top.uint("seed").value_or(cfg.seed);

    const auto exps = top.get("experiments");
    if (!exps || !exps.IsSequence() || exps.size() == 0) {
        top.fail("experiments", exps ? exps : root, "expected a non-empty list of experiment names");
    }
    for (std::size_t i = 0; i < exps.size(); ++i) {
        const std::string path = "experiments[" + std::to_string(i) + "]";
        const auto e = exps[i].IsScalar() ? parse_experiment(exps[i].Scalar()) : std::nullopt;
        if (!e) {
            top.fail(path, exps[i], "unknown experiment");
        }
        cfg.experiments.push_back(*e);
    }

    {
        MapReader r(top.get("topology"), "topology", ov);
        cfg.topology.link_latency_ns = r.uint("link_latency_ns").value_or(cfg.topology.link_latency_ns);
        cfg.topology.switch_latency_ns = r.uint("switch_latency_ns").value_or(cfg.topology.switch_latency_ns);
        cfg.topology.mac_serial_ns = r.uint("mac_serial_ns");
        r.finish();
    }

    auto file = [&](const std::string& key) -> std::optional<std::string> {
        auto p = top.str(key);
        if (!p) {
            return std::nullopt;
        }
        auto full = resolve(base_dir, *p);
        if (!fs::is_regular_file(full)) {
            top.fail(key, top.at(key), "file not found: " + full);
        }
        return full;
    };
    cfg.ruleset_path = file("ruleset");
    cfg.trace_path = file("trace");
    cfg.truth_path = file("truth");

    if (auto mons = top.get("monitors")) {
        if (!mons.IsSequence()) {
            top.fail("monitors", mons, "expected a list");
        }
        std::set<std::string> ids;
        for (std::size_t i = 0; i < mons.size(); ++i) {
            const std::string path = "monitors[" + std::to_string(i) + "]";
            auto m = read_monitor(mons[i], path, ov);
            if (!ids.insert(m.id).second) {
                top.fail(path + ".id", mons[i], "duplicate monitor id '" + m.id + "'");
            }
            cfg.monitors.push_back(std::move(m));
        }
    } else {
        monitor::MonitorSpec m;
        m.id = "pl";
        cfg.monitors.push_back(m);
    }

    {
        MapReader r(top.get("raft"), "raft", ov);
        cfg.raft.replicas = r.uint("replicas").value_or(cfg.raft.replicas);
        if (cfg.raft.replicas % 2 == 0) {
            r.fail("raft.replicas", r.at("replicas"), "cluster size must be odd");
        }
        cfg.raft.link_latency_ns = r.uint("link_latency_ns").value_or(cfg.raft.link_latency_ns);
        cfg.raft.switch_latency_ns = r.uint("switch_latency_ns").value_or(cfg.raft.switch_latency_ns);
        cfg.raft.mac_serial_ns = r.uint("mac_serial_ns").value_or(cfg.raft.mac_serial_ns);
        cfg.raft.service = read_service(r);
        cfg.raft.requests = r.uint("requests").value_or(cfg.raft.requests);
        cfg.raft.idle_gap_ns = r.uint("idle_gap_ns").value_or(cfg.raft.idle_gap_ns);
        cfg.raft.rx_queue_capacity = nonzero(r, "rx_queue_capacity", cfg.raft.rx_queue_capacity);
        r.finish();
    }

    {
        MapReader r(top.get("plane"), "plane", ov);
        cfg.plane.preset = r.str("preset").value_or(cfg.plane.preset);
        if (cfg.plane.preset != "nanopu" && cfg.plane.preset != "zero") {
            r.fail("plane.preset", r.at("preset"), "unknown preset '" + cfg.plane.preset + "'");
        }
        cfg.plane.classifiers = nonzero(r, "classifiers", cfg.plane.classifiers);
        const auto mode = r.str("shard_mode").value_or("replicate");
        if (mode == "replicate") {
            cfg.plane.shard_mode = classify::ShardMode::Replicate;
        } else if (mode == "partition") {
            cfg.plane.shard_mode = classify::ShardMode::PartitionByHash;
        } else {
            r.fail("plane.shard_mode", r.at("shard_mode"), "expected 'replicate' or 'partition'");
        }
        cfg.plane.classifier_service_ns = r.uint("classifier_service_ns");
        cfg.plane.monitor_service_ns = r.uint("monitor_service_ns");
        cfg.plane.rx_queue_capacity = nonzero(r, "rx_queue_capacity", cfg.plane.rx_queue_capacity);
        if (auto el = r.get("elements")) {
            if (!el.IsMap() || el.size() == 0) {
                r.fail("plane.elements", el, "expected a mapping of element id to port list");
            }
            cfg.plane.elements.clear();
            for (const auto& kv : el) {
                const std::string path = "plane.elements." + kv.first.Scalar();
                const auto id = r.to_uint(path, kv.first);
                if (id == 0 || id > UINT32_MAX) {
                    r.fail(path, kv.first, "element ids must be in 1..2^32-1");
                }
                if (!kv.second.IsSequence()) {
                    r.fail(path, kv.second, "expected a list of ports");
                }
                auto& ports = cfg.plane.elements[static_cast<monitor::ElementId>(id)];
                for (const auto& p : kv.second) {
                    ports.push_back(static_cast<std::uint32_t>(r.to_uint(path, p)));
                }
            }
        }
        r.finish();
    }

    {
        MapReader r(top.get("classify"), "classify", ov);
        const auto engine = r.str("engine").value_or("tree");
        const auto e = parse_engine_kind(engine);
        if (!e) {
            r.fail("classify.engine", r.at("engine"), "expected linear, tree or learned");
        }
        cfg.classify.engine = *e;
        cfg.classify.synth_rules = nonzero(r, "synth_rules", cfg.classify.synth_rules);
        cfg.classify.keys = r.uint("keys").value_or(cfg.classify.keys);
        r.finish();
    }

    {
        MapReader r(top.get("bottleneck"), "bottleneck", ov);
        if (auto list = r.get("classifier_service_ns")) {
            if (!list.IsSequence() || list.size() == 0) {
                r.fail("bottleneck.classifier_service_ns", list, "expected a non-empty list");
            }
            cfg.bottleneck.classifier_service_ns.clear();
            for (const auto& v : list) {
                cfg.bottleneck.classifier_service_ns.push_back(r.to_uint("bottleneck.classifier_service_ns", v));
            }
        }
        cfg.bottleneck.monitor_service_ns = r.uint("monitor_service_ns").value_or(cfg.bottleneck.monitor_service_ns);
        cfg.bottleneck.reports = r.uint("reports").value_or(cfg.bottleneck.reports);
        if (cfg.bottleneck.reports < 10) {
            r.fail("bottleneck.reports", r.at("reports"), "need at least 10 reports");
        }
        r.finish();
    }

    {
        MapReader r(top.get("workload"), "workload", ov);
        if (auto list = r.get("rates_rps")) {
            if (!list.IsSequence() || list.size() == 0) {
                r.fail("workload.rates_rps", list, "expected a non-empty list");
            }
            cfg.workload.rates_rps.clear();
            for (const auto& v : list) {
                const double rate = r.to_real("workload.rates_rps", v);
                if (!(rate > 0)) {
                    r.fail("workload.rates_rps", v, "rates must be > 0");
                }
                cfg.workload.rates_rps.push_back(rate);
            }
        }
        cfg.workload.requests = nonzero(r, "requests", cfg.workload.requests);
        cfg.workload.duration_ns = r.uint("duration_ns");
        cfg.workload.report_rate_rps = r.real("report_rate_rps").value_or(cfg.workload.report_rate_rps);
        if (!(cfg.workload.report_rate_rps > 0)) {
            r.fail("workload.report_rate_rps", r.at("report_rate_rps"), "must be > 0");
        }
        r.finish();
    }

    {
        MapReader r(top.get("output"), "output", ov);
        cfg.output.dir = r.str("dir").value_or(cfg.output.dir);
        cfg.output.csv = r.str("csv").value_or(cfg.output.csv);
        cfg.output.trace_dump = r.boolean("trace_dump").value_or(false);
        r.finish();
    }
    top.finish();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", 0, "cannot read config file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), overrides, fs::path(path).parent_path().string().empty()
                                                   ? std::string(".")
                                                   : fs::path(path).parent_path().string());
}

}  // namespace reflex::scenario
