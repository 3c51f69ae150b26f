#pragma once

#include "reflex/raftstate/payload.hpp"

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace reflex::raft {

struct ElementState {
    ElementId element_id = 0;
    std::map<std::string, std::string> kv;
    std::map<telemetry::FlowKey, std::uint32_t> forwarding_table;
    std::map<std::string, std::int64_t> params;
    std::map<std::string, std::vector<std::string>> tables;
    /// Mutations applied to this element.
    std::uint64_t applied = 0;

    bool operator==(const ElementState&) const = default;
    std::uint64_t digest() const;
};

/// Name of the parameter a Throttle command sets.
std::string throttle_param(const telemetry::FlowKey& flow);

/// Applies a command body to an element's state.
void apply_body(ElementState& state, const monitor::CommandBody& body);

/// The replicated state machine: per-element state plus the request dedup table.
class ElementStore {
public:
    static constexpr std::size_t kDedupWindow = 1 << 16;

    ElementStore() = default;
    explicit ElementStore(std::set<ElementId> elements) : known_(std::move(elements)) { known_.insert(kStoreElement); }

    bool known(ElementId element) const { return known_.contains(element); }
    const std::set<ElementId>& elements() const noexcept { return known_; }

    /// Applies one log entry. Returns false when (client, request) was already
    /// applied and the entry was skipped. client_id 0 is never deduplicated.
    bool apply(const Payload& payload, std::uint64_t client_id, std::uint64_t request_id);

    /// State of a known element; unmodified elements read as empty.
    ElementState state(ElementId element) const;
    bool seen(std::uint64_t client_id, std::uint64_t request_id) const;

    /// Covers every element's state and the dedup table.
    std::uint64_t digest() const;
    /// Running hash over every apply outcome so far; O(1) to read.
    std::uint64_t history_digest() const noexcept { return history_; }

private:
    struct ClientWindow {
        std::deque<std::uint64_t> order;
        std::set<std::uint64_t> ids;
    };

    std::set<ElementId> known_{kStoreElement};
    std::map<ElementId, ElementState> states_;
    std::map<std::uint64_t, ClientWindow> dedup_;
    std::uint64_t history_ = 0;
};

}  // namespace reflex::raft
