#pragma once

#include "reflex/telemetry/int_report.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

namespace reflex::monitor {

using sim::VirtualTime;
using telemetry::FlowKey;
using ElementId = std::uint32_t;
using MonitorId = std::string;

struct Reroute {
    FlowKey flow;
    ElementId at_switch = 0;
    std::uint32_t new_egress_port = 0;
    bool operator==(const Reroute&) const = default;
};

struct Throttle {
    FlowKey flow;
    std::uint64_t rate_bits_per_s = 0;
    bool operator==(const Throttle&) const = default;
};

struct SetParam {
    std::string name;
    std::int64_t value = 0;
    bool operator==(const SetParam&) const = default;
};

struct UpdateRule {
    std::string table;
    std::string entry;  ///< opaque bytes
    bool operator==(const UpdateRule&) const = default;
};

using CommandBody = std::variant<Reroute, Throttle, SetParam, UpdateRule>;

struct ReflexCommand {
    std::uint64_t command_id = 0;
    MonitorId origin;
    VirtualTime issued_at = 0;
    ElementId target_element = 0;
    CommandBody body;

    bool operator==(const ReflexCommand&) const = default;
};

std::string_view kind_name(const CommandBody& body);
std::string to_string(const ReflexCommand& cmd);

class MonitorError : public std::invalid_argument {
public:
    enum class Code { UnknownField, InvalidConfig, ZeroInput };

    MonitorError(Code code, const std::string& what) : std::invalid_argument(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// Hands out command ids unique within a run: a per-monitor base plus a counter.
class CommandIds {
public:
    explicit CommandIds(std::uint64_t base = 0) noexcept : next_(base) {}
    std::uint64_t next() noexcept { return next_++; }

private:
    std::uint64_t next_;
};

/// Id base for the monitor at `index`; leaves 2^40 ids per monitor.
constexpr std::uint64_t command_id_base(std::size_t index) noexcept {
    return (static_cast<std::uint64_t>(index) + 1) << 40;
}

}  // namespace reflex::monitor
