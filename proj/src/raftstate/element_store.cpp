#include "reflex/raftstate/element_store.hpp"

#include "reflex/simnet/rng.hpp"

namespace reflex::raft {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept {
    return sim::splitmix64(h ^ sim::splitmix64(v));
}

std::uint64_t mix(std::uint64_t h, std::string_view s) noexcept {
    return mix(h, sim::fnv1a(s));
}

std::uint64_t digest_of(const Payload& p) {
    return digest(p);
}

}  // namespace

std::uint64_t ElementState::digest() const {
    std::uint64_t h = mix(0x5eedULL, element_id);
    for (const auto& [k, v] : kv) {
        h = mix(mix(h, k), v);
    }
    for (const auto& [flow, port] : forwarding_table) {
        h = mix(mix(h, flow.to_string()), port);
    }
    for (const auto& [name, value] : params) {
        h = mix(mix(h, name), static_cast<std::uint64_t>(value));
    }
    for (const auto& [name, rows] : tables) {
        h = mix(h, name);
        for (const auto& row : rows) {
            h = mix(h, row);
        }
    }
    return mix(h, applied);
}

std::string throttle_param(const telemetry::FlowKey& flow) {
    return "throttle/" + flow.to_string();
}

void apply_body(ElementState& state, const monitor::CommandBody& body) {
    if (const auto* r = std::get_if<monitor::Reroute>(&body)) {
        state.forwarding_table[r->flow] = r->new_egress_port;
    } else if (const auto* t = std::get_if<monitor::Throttle>(&body)) {
        state.params[throttle_param(t->flow)] = static_cast<std::int64_t>(t->rate_bits_per_s);
    } else if (const auto* p = std::get_if<monitor::SetParam>(&body)) {
        state.params[p->name] = p->value;
    } else if (const auto* u = std::get_if<monitor::UpdateRule>(&body)) {
        state.tables[u->table].push_back(u->entry);
    }
    ++state.applied;
}

bool ElementStore::apply(const Payload& payload, std::uint64_t client_id, std::uint64_t request_id) {
    if (client_id != 0) {
        ClientWindow& w = dedup_[client_id];
        if (w.ids.contains(request_id)) {
            history_ = mix(history_, 0);
            return false;
        }
        w.ids.insert(request_id);
        w.order.push_back(request_id);
        if (w.order.size() > kDedupWindow) {
            w.ids.erase(w.order.front());
            w.order.pop_front();
        }
    }
    history_ = mix(history_, digest_of(payload));
    auto state_for = [&](ElementId e) -> ElementState& {
        auto [it, inserted] = states_.try_emplace(e);
        if (inserted) {
            it->second.element_id = e;
        }
        return it->second;
    };
    if (const auto* kv = std::get_if<KvWrite>(&payload)) {
        ElementState& s = state_for(kv->element);
        s.kv[kv->key] = kv->value;
        ++s.applied;
    } else if (const auto* r = std::get_if<monitor::ReflexCommand>(&payload)) {
        apply_body(state_for(r->target_element), r->body);
    } else if (const auto* c = std::get_if<ControlCommand>(&payload)) {
        apply_body(state_for(c->target), c->body);
    }
    return true;
}

ElementState ElementStore::state(ElementId element) const {
    if (!known(element)) {
        throw RaftError(RaftError::Code::UnknownElement, "unknown element " + std::to_string(element));
    }
    auto it = states_.find(element);
    if (it == states_.end()) {
        ElementState empty;
        empty.element_id = element;
        return empty;
    }
    return it->second;
}

bool ElementStore::seen(std::uint64_t client_id, std::uint64_t request_id) const {
    auto it = dedup_.find(client_id);
    return it != dedup_.end() && it->second.ids.contains(request_id);
}

std::uint64_t ElementStore::digest() const {
    std::uint64_t h = 0x57a7eULL;
    for (const auto& [id, s] : states_) {
        h = mix(h, s.digest());
    }
    for (const auto& [client, w] : dedup_) {
        h = mix(h, client);
        for (std::uint64_t r : w.order) {
            h = mix(h, r);
        }
    }
    return h;
}

}  // namespace reflex::raft
