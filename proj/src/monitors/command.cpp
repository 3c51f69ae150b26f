#include "reflex/monitors/command.hpp"

#include <fmt/format.h>

namespace reflex::monitor {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view kind_name(const CommandBody& body) {
    static constexpr std::string_view kNames[] = {"Reroute", "Throttle", "SetParam", "UpdateRule"};
    return kNames[body.index()];
}

std::string to_string(const ReflexCommand& cmd) {
    const std::string body = std::visit(
        Overloaded{
            [](const Reroute& r) { return fmt::format("flow={} switch={} port={}", r.flow.to_string(), r.at_switch, r.new_egress_port); },
            [](const Throttle& t) { return fmt::format("flow={} rate={}", t.flow.to_string(), t.rate_bits_per_s); },
            [](const SetParam& p) { return fmt::format("{}={}", p.name, p.value); },
            [](const UpdateRule& u) { return fmt::format("table={} bytes={}", u.table, u.entry.size()); },
        },
        cmd.body);
    return fmt::format("#{} {} from {} at {} -> element {}: {}", cmd.command_id, kind_name(cmd.body), cmd.origin,
                       cmd.issued_at, cmd.target_element, body);
}

}  // namespace reflex::monitor
