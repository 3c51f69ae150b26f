#include "reflex/raftstate/checker.hpp"

#include <fmt/format.h>

namespace reflex::raft {

std::string_view to_string(Violation::Kind kind) {
    switch (kind) {
        case Violation::Kind::ElectionSafety: return "election-safety";
        case Violation::Kind::LogMatching: return "log-matching";
        case Violation::Kind::LeaderCompleteness: return "leader-completeness";
        case Violation::Kind::StateMachineSafety: return "state-machine-safety";
        case Violation::Kind::ExactlyOnce: return "exactly-once";
    }
    return "?";
}

namespace {

std::uint64_t entry_digest(const LogEntry& e) {
    return sim::splitmix64(digest(e.payload) ^ sim::splitmix64(e.client_id * 0x9e3779b97f4a7c15ULL + e.request_id));
}

}  // namespace

SafetyChecker::SafetyChecker(RaftCluster& cluster, std::size_t log_check_every)
    : cluster_(cluster), log_check_every_(std::max<std::size_t>(log_check_every, 1)), commit_seen_(cluster.size(), 0) {}

void SafetyChecker::attach() {
    cluster_.sim().set_observer([this](const sim::TraceRecord&) { on_event(); });
    for (ServerIndex i = 0; i < cluster_.size(); ++i) {
        cluster_.server(i).set_apply_observer(
            [this](ServerIndex s, const std::vector<AppliedEntry>& applied) { on_apply(s, applied); });
    }
}

void SafetyChecker::report(Violation::Kind kind, std::string detail) {
    violations_.push_back(Violation{kind, cluster_.sim().now(), std::move(detail)});
}

void SafetyChecker::on_event() {
    ++events_;
    check_election();
    track_commits();
    if (events_ % log_check_every_ == 0) {
        check_log_matching();
    }
}

void SafetyChecker::check_now() {
    check_election();
    track_commits();
    check_log_matching();
    for (const auto& [term, leader] : leaders_) {
        (void)term;
        if (cluster_.node(leader).role() == Role::Leader) {
            check_leader_completeness(leader);
        }
    }
    check_state_equality();
}

void SafetyChecker::check_election() {
    ++checks_;
    for (ServerIndex i = 0; i < cluster_.size(); ++i) {
        const RaftNode& n = cluster_.node(i);
        if (n.role() != Role::Leader) {
            continue;
        }
        auto [it, inserted] = leaders_.emplace(n.current_term(), i);
        if (inserted) {
            check_leader_completeness(i);
        } else if (it->second != i) {
            report(Violation::Kind::ElectionSafety,
                   fmt::format("term {} has leaders {} and {}", n.current_term(), it->second, i));
        }
    }
}

void SafetyChecker::track_commits() {
    for (ServerIndex i = 0; i < cluster_.size(); ++i) {
        const RaftNode& n = cluster_.node(i);
        // A restarted node starts over from commit 0.
        if (n.commit_index() < commit_seen_[i]) {
            commit_seen_[i] = 0;
        }
        for (std::uint64_t idx = commit_seen_[i] + 1; idx <= n.commit_index(); ++idx) {
            const LogEntry& e = n.entry(idx);
            const Committed c{e.term, entry_digest(e), n.current_term()};
            auto [it, inserted] = committed_.emplace(idx, c);
            if (!inserted && (it->second.term != c.term || it->second.digest != c.digest)) {
                report(Violation::Kind::StateMachineSafety,
                       fmt::format("server {} committed a different entry at index {}", i, idx));
            }
        }
        commit_seen_[i] = n.commit_index();
    }
}

void SafetyChecker::check_log_matching() {
    const std::size_t n = cluster_.size();
    // Prefix hash chains: equal (index, term) must imply equal prefixes.
    std::vector<std::vector<std::uint64_t>> chains(n);
    for (ServerIndex i = 0; i < n; ++i) {
        const auto& log = cluster_.node(i).log();
        chains[i].reserve(log.size());
        std::uint64_t h = 0;
        for (const auto& e : log) {
            h = sim::splitmix64(h ^ sim::splitmix64(e.term ^ (entry_digest(e) << 1)));
            chains[i].push_back(h);
        }
    }
    for (ServerIndex a = 0; a < n; ++a) {
        for (ServerIndex b = a + 1; b < n; ++b) {
            const auto& la = cluster_.node(a).log();
            const auto& lb = cluster_.node(b).log();
            const std::size_t m = std::min(la.size(), lb.size());
            // Checking the highest shared (index, term) pair covers all lower ones.
            for (std::size_t k = m; k-- > 0;) {
                if (la[k].term == lb[k].term) {
                    if (chains[a][k] != chains[b][k]) {
                        report(Violation::Kind::LogMatching,
                               fmt::format("servers {} and {} agree on index {} term {} but differ before it", a, b,
                                           k + 1, la[k].term));
                    }
                    break;
                }
            }
        }
    }
}

void SafetyChecker::check_leader_completeness(ServerIndex leader) {
    const RaftNode& n = cluster_.node(leader);
    for (const auto& [idx, c] : committed_) {
        if (c.seen_in_term >= n.current_term()) {
            continue;
        }
        if (idx > n.last_index() || n.entry(idx).term != c.term || entry_digest(n.entry(idx)) != c.digest) {
            report(Violation::Kind::LeaderCompleteness,
                   fmt::format("leader {} of term {} lacks committed index {}", leader, n.current_term(), idx));
            return;
        }
    }
}

void SafetyChecker::check_state_equality() {
    std::map<std::uint64_t, std::pair<ServerIndex, std::uint64_t>> by_applied;
    for (ServerIndex i = 0; i < cluster_.size(); ++i) {
        const RaftNode& n = cluster_.node(i);
        const std::uint64_t d = n.store().digest();
        auto [it, inserted] = by_applied.emplace(n.last_applied(), std::pair{i, d});
        if (!inserted && it->second.second != d) {
            report(Violation::Kind::StateMachineSafety,
                   fmt::format("servers {} and {} applied {} entries but hold different state", it->second.first, i,
                               n.last_applied()));
        }
    }
}

void SafetyChecker::on_apply(ServerIndex server, const std::vector<AppliedEntry>& applied) {
    const std::uint32_t incarnation = cluster_.server(server).incarnation();
    for (const auto& a : applied) {
        auto [it, inserted] = apply_hash_.emplace(a.entry.index, a.state_digest);
        if (!inserted && it->second != a.state_digest) {
            report(Violation::Kind::StateMachineSafety,
                   fmt::format("server {} diverged after applying index {}", server, a.entry.index));
        }
        if (a.entry.client_id != 0 && !a.duplicate) {
            if (!applied_requests_.emplace(server, incarnation, a.entry.client_id, a.entry.request_id).second) {
                report(Violation::Kind::ExactlyOnce, fmt::format("server {} applied request {}/{} twice", server,
                                                                 a.entry.client_id, a.entry.request_id));
            }
        }
    }
}

}  // namespace reflex::raft
