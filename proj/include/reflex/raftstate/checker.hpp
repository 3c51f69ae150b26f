#pragma once

#include "reflex/raftstate/cluster.hpp"

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace reflex::raft {

struct Violation {
    enum class Kind { ElectionSafety, LogMatching, LeaderCompleteness, StateMachineSafety, ExactlyOnce };

    Kind kind;
    VirtualTime at = 0;
    std::string detail;
};

std::string_view to_string(Violation::Kind kind);

/// Watches a running cluster between simulator events and records any
/// breach of the Raft safety properties.
class SafetyChecker {
public:
    explicit SafetyChecker(RaftCluster& cluster, std::size_t log_check_every = 64);

    /// Hooks into the simulator observer and every server's apply stream.
    void attach();
    /// Runs every check once, including full log and state comparisons.
    void check_now();

    const std::vector<Violation>& violations() const noexcept { return violations_; }
    bool ok() const noexcept { return violations_.empty(); }
    std::size_t leaders_seen() const noexcept { return leaders_.size(); }
    std::size_t committed_seen() const noexcept { return committed_.size(); }
    std::uint64_t checks() const noexcept { return checks_; }

private:
    struct Committed {
        std::uint64_t term;
        std::uint64_t digest;
        std::uint64_t seen_in_term;
    };

    void on_event();
    void check_election();
    void track_commits();
    void check_log_matching();
    void check_leader_completeness(ServerIndex leader);
    void check_state_equality();
    void on_apply(ServerIndex server, const std::vector<AppliedEntry>& applied);
    void report(Violation::Kind kind, std::string detail);

    RaftCluster& cluster_;
    std::size_t log_check_every_;
    std::uint64_t events_ = 0;
    std::uint64_t checks_ = 0;
    std::map<std::uint64_t, ServerIndex> leaders_;  ///< term -> leader
    std::map<std::uint64_t, Committed> committed_;  ///< index -> entry identity
    std::vector<std::uint64_t> commit_seen_;
    std::map<std::uint64_t, std::uint64_t> apply_hash_;  ///< index -> state history digest
    std::set<std::tuple<ServerIndex, std::uint32_t, std::uint64_t, std::uint64_t>> applied_requests_;
    std::vector<Violation> violations_;
};

}  // namespace reflex::raft
