#include "reflex/monitors/monitor.hpp"

namespace reflex::monitor {

namespace {

class PathLatencyAdapter final : public Monitor {
public:
    PathLatencyAdapter(const MonitorSpec& spec, std::size_t index, const TopologySnapshot& topo)
        : impl_(spec.id, spec.path_latency, topo, command_id_base(index)) {}
    const MonitorId& id() const noexcept override { return impl_.id(); }
    MonitorKind kind() const noexcept override { return MonitorKind::PathLatency; }
    std::vector<ReflexCommand> observe(const classify::ProjectedReport& r, VirtualTime now) override {
        std::vector<ReflexCommand> out;
        if (auto cmd = impl_.observe(r.report, now)) {
            out.push_back(std::move(*cmd));
        }
        return out;
    }

private:
    PathLatencyMonitor impl_;
};

class MicroburstAdapter final : public Monitor {
public:
    MicroburstAdapter(const MonitorSpec& spec, std::size_t index) : impl_(spec.id, spec.microburst, command_id_base(index)) {}
    const MonitorId& id() const noexcept override { return impl_.id(); }
    MonitorKind kind() const noexcept override { return MonitorKind::Microburst; }
    std::vector<ReflexCommand> observe(const classify::ProjectedReport& r, VirtualTime now) override {
        return impl_.observe(r.report, now);
    }

private:
    MicroburstMonitor impl_;
};

class ThresholdAdapter final : public Monitor {
public:
    ThresholdAdapter(const MonitorSpec& spec, std::size_t index)
        : impl_(spec.id, ThresholdSpec::parse(spec.field, spec.limit), command_id_base(index)) {}
    const MonitorId& id() const noexcept override { return impl_.id(); }
    MonitorKind kind() const noexcept override { return MonitorKind::Threshold; }
    std::vector<ReflexCommand> observe(const classify::ProjectedReport& r, VirtualTime now) override {
        std::vector<ReflexCommand> out;
        if (auto cmd = impl_.observe(r, now)) {
            out.push_back(std::move(*cmd));
        }
        return out;
    }

private:
    ThresholdMonitor impl_;
};

}  // namespace

std::string_view to_string(MonitorKind kind) {
    switch (kind) {
        case MonitorKind::PathLatency: return "path_latency";
        case MonitorKind::Microburst: return "microburst";
        case MonitorKind::Threshold: return "threshold";
    }
    return "?";
}

std::optional<MonitorKind> parse_monitor_kind(std::string_view name) {
    for (auto k : {MonitorKind::PathLatency, MonitorKind::Microburst, MonitorKind::Threshold}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::unique_ptr<Monitor> make_monitor(const MonitorSpec& spec, std::size_t index, const TopologySnapshot& topology) {
    switch (spec.kind) {
        case MonitorKind::PathLatency: return std::make_unique<PathLatencyAdapter>(spec, index, topology);
        case MonitorKind::Microburst: return std::make_unique<MicroburstAdapter>(spec, index);
        case MonitorKind::Threshold: return std::make_unique<ThresholdAdapter>(spec, index);
    }
    throw MonitorError(MonitorError::Code::InvalidConfig, "unknown monitor kind");
}

}  // namespace reflex::monitor
