#include "reflex/raftstate/raft_node.hpp"

#include <algorithm>

namespace reflex::raft {

std::string_view message_name(const RaftMessage& msg) {
    static constexpr std::string_view kNames[] = {"RequestVote", "VoteReply",   "AppendEntries", "AppendReply",
                                                  "ClientWrite", "ClientReply", "SwitchUpdate"};
    return kNames[msg.index()];
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Follower: return "follower";
        case Role::Candidate: return "candidate";
        case Role::Leader: return "leader";
    }
    return "?";
}

namespace {

Destination server(ServerIndex i) {
    return {Destination::Kind::Server, i};
}

}  // namespace

RaftNode::RaftNode(ServerIndex self, std::size_t cluster_size, RaftConfig config, std::uint64_t seed,
                   std::set<ElementId> elements, VirtualTime now)
    : self_(self),
      cluster_size_(cluster_size),
      config_(config),
      rng_(seed),
      next_(cluster_size, 1),
      match_(cluster_size, 0),
      last_sent_(cluster_size, 0),
      store_(std::move(elements)) {
    if (cluster_size == 0 || self >= cluster_size) {
        throw RaftError(RaftError::Code::InvalidConfig, "server index out of range");
    }
    if (config_.election_timeout_min == 0 || config_.election_timeout_max < config_.election_timeout_min) {
        throw RaftError(RaftError::Code::InvalidConfig, "invalid election timeout range");
    }
    reset_election_deadline(now);
}

RaftNode RaftNode::restore(ServerIndex self, std::size_t cluster_size, RaftConfig config, std::uint64_t seed,
                           std::set<ElementId> elements, PersistentState persisted, VirtualTime now) {
    RaftNode node(self, cluster_size, config, seed, std::move(elements), now);
    node.term_ = persisted.current_term;
    node.voted_for_ = persisted.voted_for;
    node.log_ = std::move(persisted.log);
    return node;
}

void RaftNode::reset_election_deadline(VirtualTime now) {
    election_deadline_ = now + rng_.uniform(config_.election_timeout_min, config_.election_timeout_max);
}

VirtualTime RaftNode::next_deadline() const noexcept {
    if (role_ != Role::Leader) {
        return election_deadline_;
    }
    VirtualTime t = sim::kNever;
    for (ServerIndex p = 0; p < cluster_size_; ++p) {
        if (p != self_) {
            t = std::min(t, last_sent_[p] + config_.heartbeat_interval);
        }
    }
    return t;
}

void RaftNode::become_follower(std::uint64_t term, VirtualTime now) {
    if (term > term_) {
        term_ = term;
        voted_for_.reset();
    }
    if (role_ != Role::Follower) {
        role_ = Role::Follower;
        reset_election_deadline(now);
    }
    votes_.clear();
}

void RaftNode::start_election(VirtualTime now, std::vector<Outbound>& out) {
    ++term_;
    role_ = Role::Candidate;
    voted_for_ = self_;
    leader_.reset();
    votes_ = {self_};
    reset_election_deadline(now);
    if (votes_.size() >= majority()) {
        become_leader(now, out);
        return;
    }
    const RequestVote rv{term_, self_, last_index(), term_at(last_index())};
    for (ServerIndex p = 0; p < cluster_size_; ++p) {
        if (p != self_) {
            out.push_back({server(p), rv});
        }
    }
}

void RaftNode::become_leader(VirtualTime now, std::vector<Outbound>& out) {
    role_ = Role::Leader;
    leader_ = self_;
    votes_.clear();
    std::fill(next_.begin(), next_.end(), last_index() + 1);
    std::fill(match_.begin(), match_.end(), 0);
    // A no-op from the new term lets entries from earlier terms commit.
    log_.push_back(LogEntry{term_, last_index() + 1, 0, 0, NoOp{}});
    match_[self_] = last_index();
    advance_commit();
    broadcast_append(now, out);
}

void RaftNode::send_append(ServerIndex peer, VirtualTime now, std::vector<Outbound>& out) {
    AppendEntries ae;
    ae.term = term_;
    ae.leader = self_;
    ae.prev_index = next_[peer] - 1;
    ae.prev_term = term_at(ae.prev_index);
    ae.leader_commit = commit_;
    const std::uint64_t last = std::min<std::uint64_t>(last_index(), ae.prev_index + config_.max_batch);
    for (std::uint64_t i = next_[peer]; i <= last; ++i) {
        ae.entries.push_back(log_[i - 1]);
    }
    // Pipelining: assume delivery; a failed reply moves next_index back.
    next_[peer] = last + 1;
    last_sent_[peer] = now;
    out.push_back({server(peer), std::move(ae)});
}

void RaftNode::broadcast_append(VirtualTime now, std::vector<Outbound>& out) {
    for (ServerIndex p = 0; p < cluster_size_; ++p) {
        if (p != self_) {
            send_append(p, now, out);
        }
    }
}

void RaftNode::advance_commit() {
    match_[self_] = last_index();
    std::vector<std::uint64_t> sorted = match_;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::uint64_t n = sorted[majority() - 1];
    // Only entries from the current term commit by counting replicas.
    if (n > commit_ && term_at(n) == term_) {
        commit_ = n;
    }
}

std::vector<Outbound> RaftNode::tick(VirtualTime now) {
    std::vector<Outbound> out;
    if (role_ == Role::Leader) {
        for (ServerIndex p = 0; p < cluster_size_; ++p) {
            if (p != self_ && now >= last_sent_[p] + config_.heartbeat_interval) {
                send_append(p, now, out);
            }
        }
    } else if (now >= election_deadline_) {
        start_election(now, out);
    }
    return out;
}

std::vector<Outbound> RaftNode::handle(Destination from, const RaftMessage& msg, VirtualTime now) {
    std::vector<Outbound> out;
    const auto peer = static_cast<ServerIndex>(from.id);
    const bool from_server = from.kind == Destination::Kind::Server && from.id < cluster_size_;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, RequestVote>) {
                if (from_server) on_request_vote(m, now, out);
            } else if constexpr (std::is_same_v<T, VoteReply>) {
                if (from_server) on_vote_reply(peer, m, now, out);
            } else if constexpr (std::is_same_v<T, AppendEntries>) {
                if (from_server) on_append(peer, m, now, out);
            } else if constexpr (std::is_same_v<T, AppendReply>) {
                if (from_server) on_append_reply(peer, m, now, out);
            } else if constexpr (std::is_same_v<T, ClientWrite>) {
                on_client_write(from, m, now, out);
            }
        },
        msg);
    return out;
}

void RaftNode::on_request_vote(const RequestVote& m, VirtualTime now, std::vector<Outbound>& out) {
    if (m.term > term_) {
        become_follower(m.term, now);
        leader_.reset();
    }
    const std::uint64_t my_last_term = term_at(last_index());
    const bool up_to_date =
        m.last_log_term > my_last_term || (m.last_log_term == my_last_term && m.last_log_index >= last_index());
    const bool grant = m.term == term_ && (!voted_for_ || *voted_for_ == m.candidate) && up_to_date;
    if (grant) {
        voted_for_ = m.candidate;
        reset_election_deadline(now);
    }
    out.push_back({server(m.candidate), VoteReply{term_, grant}});
}

void RaftNode::on_vote_reply(ServerIndex from, const VoteReply& m, VirtualTime now, std::vector<Outbound>& out) {
    if (m.term > term_) {
        become_follower(m.term, now);
        leader_.reset();
        return;
    }
    if (role_ != Role::Candidate || m.term != term_ || !m.granted) {
        return;
    }
    votes_.insert(from);
    if (votes_.size() >= majority()) {
        become_leader(now, out);
    }
}

void RaftNode::on_append(ServerIndex from, const AppendEntries& m, VirtualTime now, std::vector<Outbound>& out) {
    if (m.term < term_) {
        out.push_back({server(from), AppendReply{term_, false, 0}});
        return;
    }
    become_follower(m.term, now);
    leader_ = m.leader;
    reset_election_deadline(now);

    if (m.prev_index > last_index() || term_at(m.prev_index) != m.prev_term) {
        const std::uint64_t hint = m.prev_index > last_index() ? last_index() : m.prev_index - 1;
        out.push_back({server(from), AppendReply{term_, false, hint}});
        return;
    }
    for (const LogEntry& e : m.entries) {
        if (e.index <= last_index()) {
            if (term_at(e.index) == e.term) {
                continue;
            }
            // Conflict: drop this entry and everything after it.
            log_.resize(e.index - 1);
        }
        log_.push_back(e);
    }
    const std::uint64_t last_new = m.prev_index + m.entries.size();
    if (m.leader_commit > commit_) {
        commit_ = std::max(commit_, std::min(m.leader_commit, last_new));
    }
    out.push_back({server(from), AppendReply{term_, true, last_new}});
}

void RaftNode::on_append_reply(ServerIndex from, const AppendReply& m, VirtualTime now, std::vector<Outbound>& out) {
    if (m.term > term_) {
        become_follower(m.term, now);
        leader_.reset();
        return;
    }
    if (role_ != Role::Leader || m.term != term_) {
        return;
    }
    if (m.success) {
        match_[from] = std::max(match_[from], m.match_index);
        next_[from] = std::max(next_[from], m.match_index + 1);
        advance_commit();
        if (next_[from] <= last_index()) {
            send_append(from, now, out);  // the previous batch was truncated
        }
        return;
    }
    const std::uint64_t retry = std::max<std::uint64_t>(1, std::max(match_[from], m.match_index) + 1);
    if (retry < next_[from]) {
        next_[from] = retry;
        send_append(from, now, out);
    }
}

void RaftNode::on_client_write(Destination from, const ClientWrite& m, VirtualTime now, std::vector<Outbound>& out) {
    ClientReply reply{m.client_id, m.request_id, false, leader_, {}, 0};
    if (role_ != Role::Leader) {
        out.push_back({from, reply});
        return;
    }
    if (auto problem = payload_problem(m.payload); !problem.empty()) {
        reply.rejected = problem;
        out.push_back({from, reply});
        return;
    }
    if (auto target = forward_target(m.payload); target && !store_.known(*target)) {
        reply.rejected = "unknown element " + std::to_string(*target);
        out.push_back({from, reply});
        return;
    }
    if (const auto* kv = std::get_if<KvWrite>(&m.payload); kv && !store_.known(kv->element)) {
        reply.rejected = "unknown element " + std::to_string(kv->element);
        out.push_back({from, reply});
        return;
    }
    if (m.client_id != 0) {
        if (store_.seen(m.client_id, m.request_id)) {
            reply.committed = true;
            out.push_back({from, reply});
            return;
        }
        for (std::uint64_t i = commit_ + 1; i <= last_index(); ++i) {
            const LogEntry& e = log_[i - 1];
            if (e.client_id == m.client_id && e.request_id == m.request_id) {
                return;  // already in flight; the reply comes when it applies
            }
        }
    }
    log_.push_back(LogEntry{term_, last_index() + 1, m.client_id, m.request_id, m.payload});
    advance_commit();
    for (ServerIndex p = 0; p < cluster_size_; ++p) {
        if (p != self_ && next_[p] == last_index()) {
            send_append(p, now, out);
        }
    }
}

ApplyResult RaftNode::apply_committed() {
    ApplyResult result;
    while (applied_ < commit_) {
        const LogEntry& e = log_[applied_];
        ++applied_;
        AppliedEntry a{e, false, 0};
        a.duplicate = !store_.apply(e.payload, e.client_id, e.request_id);
        a.state_digest = store_.history_digest();
        if (role_ == Role::Leader) {
            if (auto target = forward_target(e.payload); target && !a.duplicate) {
                result.outbound.push_back({{Destination::Kind::Element, *target}, SwitchUpdate{e.index, e.payload}});
            }
            if (e.client_id != 0) {
                result.outbound.push_back(
                    {{Destination::Kind::Client, e.client_id}, ClientReply{e.client_id, e.request_id, true, self_, {}, e.index}});
            }
        }
        result.applied.push_back(std::move(a));
    }
    return result;
}

}  // namespace reflex::raft
