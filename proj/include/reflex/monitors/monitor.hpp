#pragma once

#include "reflex/classifier/dispatch.hpp"
#include "reflex/monitors/microburst.hpp"
#include "reflex/monitors/path_latency.hpp"
#include "reflex/monitors/threshold.hpp"

#include <memory>
#include <string>
#include <vector>

namespace reflex::monitor {

enum class MonitorKind { PathLatency, Microburst, Threshold };

std::string_view to_string(MonitorKind kind);
/// Accepts "path_latency", "microburst", "threshold".
std::optional<MonitorKind> parse_monitor_kind(std::string_view name);

struct MonitorSpec {
    MonitorId id;
    MonitorKind kind = MonitorKind::PathLatency;
    PathLatencyConfig path_latency{};
    MicroburstConfig microburst{};
    std::string field = "queue_depth";
    double limit = 0.0;
};

/// Uniform front for the detectors so a plane node can host any of them.
class Monitor {
public:
    virtual ~Monitor() = default;
    virtual const MonitorId& id() const noexcept = 0;
    virtual MonitorKind kind() const noexcept = 0;
    virtual std::vector<ReflexCommand> observe(const classify::ProjectedReport& report, VirtualTime now) = 0;
};

std::unique_ptr<Monitor> make_monitor(const MonitorSpec& spec, std::size_t index, const TopologySnapshot& topology = {});

}  // namespace reflex::monitor
