#pragma once

#include "reflex/raftstate/element_store.hpp"
#include "reflex/simnet/rng.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <variant>
#include <vector>

namespace reflex::raft {

using ServerIndex = std::uint32_t;

struct LogEntry {
    std::uint64_t term = 0;
    std::uint64_t index = 0;
    std::uint64_t client_id = 0;  ///< 0 for entries the leader creates itself
    std::uint64_t request_id = 0;
    Payload payload;

    bool operator==(const LogEntry&) const = default;
};

struct RequestVote {
    std::uint64_t term = 0;
    ServerIndex candidate = 0;
    std::uint64_t last_log_index = 0;
    std::uint64_t last_log_term = 0;
};

struct VoteReply {
    std::uint64_t term = 0;
    bool granted = false;
};

struct AppendEntries {
    std::uint64_t term = 0;
    ServerIndex leader = 0;
    std::uint64_t prev_index = 0;
    std::uint64_t prev_term = 0;
    std::vector<LogEntry> entries;
    std::uint64_t leader_commit = 0;
};

/// On failure, match_index is the follower's hint for where to retry from.
struct AppendReply {
    std::uint64_t term = 0;
    bool success = false;
    std::uint64_t match_index = 0;
};

struct ClientWrite {
    std::uint64_t client_id = 0;
    std::uint64_t request_id = 0;
    Payload payload;
};

struct ClientReply {
    std::uint64_t client_id = 0;
    std::uint64_t request_id = 0;
    bool committed = false;
    std::optional<ServerIndex> leader_hint;
    /// Set when the request can never succeed (e.g. malformed payload).
    std::string rejected;
    std::uint64_t index = 0;  ///< log index when committed
};

/// A committed reflex or control command forwarded by the leader to its switch.
struct SwitchUpdate {
    std::uint64_t index = 0;
    Payload payload;
};

using RaftMessage = std::variant<RequestVote, VoteReply, AppendEntries, AppendReply, ClientWrite, ClientReply, SwitchUpdate>;

std::string_view message_name(const RaftMessage& msg);

enum class Role { Follower, Candidate, Leader };
std::string_view to_string(Role role);

struct Destination {
    enum class Kind { Server, Client, Element };
    Kind kind = Kind::Server;
    std::uint64_t id = 0;
};

struct Outbound {
    Destination to;
    RaftMessage msg;
};

struct RaftConfig {
    VirtualTime election_timeout_min = 150'000;
    VirtualTime election_timeout_max = 300'000;
    VirtualTime heartbeat_interval = 50'000;
    std::size_t max_batch = 64;
};

struct PersistentState {
    std::uint64_t current_term = 0;
    std::optional<ServerIndex> voted_for;
    std::vector<LogEntry> log;
};

struct AppliedEntry {
    LogEntry entry;
    bool duplicate = false;  ///< skipped by request dedup
    std::uint64_t state_digest = 0;
};

struct ApplyResult {
    std::vector<AppliedEntry> applied;
    std::vector<Outbound> outbound;
};

/// One Raft server as a pure state machine: inputs are ticks and messages,
/// outputs are messages to send. Nothing here knows about the simulator.
class RaftNode {
public:
    RaftNode(ServerIndex self, std::size_t cluster_size, RaftConfig config, std::uint64_t seed,
             std::set<ElementId> elements, VirtualTime now);
    /// Rejoins with persisted term, vote and log; volatile state starts over.
    static RaftNode restore(ServerIndex self, std::size_t cluster_size, RaftConfig config, std::uint64_t seed,
                            std::set<ElementId> elements, PersistentState persisted, VirtualTime now);

    std::vector<Outbound> tick(VirtualTime now);
    std::vector<Outbound> handle(Destination from, const RaftMessage& msg, VirtualTime now);
    ApplyResult apply_committed();

    /// Earliest time tick() has something to do.
    VirtualTime next_deadline() const noexcept;

    ServerIndex id() const noexcept { return self_; }
    Role role() const noexcept { return role_; }
    std::uint64_t current_term() const noexcept { return term_; }
    std::optional<ServerIndex> voted_for() const noexcept { return voted_for_; }
    std::optional<ServerIndex> leader_hint() const noexcept { return leader_; }
    std::uint64_t commit_index() const noexcept { return commit_; }
    std::uint64_t last_applied() const noexcept { return applied_; }
    std::uint64_t last_index() const noexcept { return log_.size(); }
    std::uint64_t term_at(std::uint64_t index) const noexcept { return index == 0 ? 0 : log_[index - 1].term; }
    const std::vector<LogEntry>& log() const noexcept { return log_; }
    const LogEntry& entry(std::uint64_t index) const { return log_.at(index - 1); }
    const ElementStore& store() const noexcept { return store_; }
    PersistentState persistent() const { return {term_, voted_for_, log_}; }
    std::vector<std::uint64_t> match_index() const { return match_; }
    std::vector<std::uint64_t> next_index() const { return next_; }
    VirtualTime election_deadline() const noexcept { return election_deadline_; }

private:
    std::size_t majority() const noexcept { return cluster_size_ / 2 + 1; }
    void reset_election_deadline(VirtualTime now);
    void become_follower(std::uint64_t term, VirtualTime now);
    void become_leader(VirtualTime now, std::vector<Outbound>& out);
    void start_election(VirtualTime now, std::vector<Outbound>& out);
    void send_append(ServerIndex peer, VirtualTime now, std::vector<Outbound>& out);
    void broadcast_append(VirtualTime now, std::vector<Outbound>& out);
    void advance_commit();

    void on_request_vote(const RequestVote& m, VirtualTime now, std::vector<Outbound>& out);
    void on_vote_reply(ServerIndex from, const VoteReply& m, VirtualTime now, std::vector<Outbound>& out);
    void on_append(ServerIndex from, const AppendEntries& m, VirtualTime now, std::vector<Outbound>& out);
    void on_append_reply(ServerIndex from, const AppendReply& m, VirtualTime now, std::vector<Outbound>& out);
    void on_client_write(Destination from, const ClientWrite& m, VirtualTime now, std::vector<Outbound>& out);

    ServerIndex self_;
    std::size_t cluster_size_;
    RaftConfig config_;
    sim::CounterRng rng_;

    std::uint64_t term_ = 0;
    std::optional<ServerIndex> voted_for_;
    std::vector<LogEntry> log_;

    Role role_ = Role::Follower;
    std::optional<ServerIndex> leader_;
    std::uint64_t commit_ = 0;
    std::uint64_t applied_ = 0;
    VirtualTime election_deadline_ = 0;
    std::set<ServerIndex> votes_;
    std::vector<std::uint64_t> next_;
    std::vector<std::uint64_t> match_;
    std::vector<VirtualTime> last_sent_;

    ElementStore store_;
};

}  // namespace reflex::raft
