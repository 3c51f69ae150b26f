#include "reflex/raftstate/payload.hpp"

#include "reflex/simnet/rng.hpp"

#include <fmt/format.h>

namespace reflex::raft {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_str(std::string& out, std::string_view s) {
    put_u64(out, s.size());
    out.append(s);
}

void put_flow(std::string& out, const telemetry::FlowKey& f) {
    put_u64(out, (std::uint64_t{f.src_ip} << 32) | f.dst_ip);
    put_u64(out, (std::uint64_t{f.src_port} << 24) | (std::uint64_t{f.dst_port} << 8) | f.proto);
}

void put_body(std::string& out, const monitor::CommandBody& body) {
    out.push_back(static_cast<char>(body.index()));
    std::visit(Overloaded{
                   [&](const monitor::Reroute& r) {
                       put_flow(out, r.flow);
                       put_u64(out, r.at_switch);
                       put_u64(out, r.new_egress_port);
                   },
                   [&](const monitor::Throttle& t) {
                       put_flow(out, t.flow);
                       put_u64(out, t.rate_bits_per_s);
                   },
                   [&](const monitor::SetParam& p) {
                       put_str(out, p.name);
                       put_u64(out, static_cast<std::uint64_t>(p.value));
                   },
                   [&](const monitor::UpdateRule& u) {
                       put_str(out, u.table);
                       put_str(out, u.entry);
                   },
               },
               body);
}

}  // namespace

std::string payload_problem(const Payload& payload) {
    if (const auto* kv = std::get_if<KvWrite>(&payload)) {
        if (kv->key.size() != kKeyBytes) {
            return fmt::format("key must be {} bytes, got {}", kKeyBytes, kv->key.size());
        }
        if (kv->value.size() != kValueBytes) {
            return fmt::format("value must be {} bytes, got {}", kValueBytes, kv->value.size());
        }
    }
    return {};
}

std::optional<ElementId> forward_target(const Payload& payload) {
    if (const auto* r = std::get_if<monitor::ReflexCommand>(&payload)) {
        return r->target_element;
    }
    if (const auto* c = std::get_if<ControlCommand>(&payload)) {
        return c->target;
    }
    return std::nullopt;
}

std::string encode(const Payload& payload) {
    std::string out;
    out.push_back(static_cast<char>(payload.index()));
    std::visit(Overloaded{
                   [](const NoOp&) {},
                   [&](const KvWrite& kv) {
                       put_u64(out, kv.element);
                       put_str(out, kv.key);
                       put_str(out, kv.value);
                   },
                   [&](const monitor::ReflexCommand& c) {
                       put_u64(out, c.command_id);
                       put_str(out, c.origin);
                       put_u64(out, c.issued_at);
                       put_u64(out, c.target_element);
                       put_body(out, c.body);
                   },
                   [&](const ControlCommand& c) {
                       put_u64(out, c.target);
                       put_body(out, c.body);
                   },
               },
               payload);
    return out;
}

std::uint64_t digest(const Payload& payload) {
    return sim::fnv1a(encode(payload));
}

std::uint32_t wire_size(const Payload& payload) {
    return static_cast<std::uint32_t>(encode(payload).size());
}

KvWrite make_kv_write(std::string_view key, std::string_view value, ElementId element) {
    return KvWrite{element, std::string(key), std::string(value)};
}

}  // namespace reflex::raft
