#pragma once

#include "reflex/simnet/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace reflex::sim {

enum class NodeKind { Host, Switch };

/// Link capacity as an exact rational number of bits per nanosecond.
/// `bits == 0` means infinite bandwidth (no serialization delay).
struct Bandwidth {
    std::uint64_t bits = 0;
    std::uint64_t per_ns = 1;

    bool infinite() const noexcept { return bits == 0; }

    /// ceil(size_bytes * 8 / (bits / per_ns)).
    VirtualTime serialization(std::uint64_t size_bytes) const noexcept;
};

struct NodeSpec {
    std::string name;
    NodeKind kind = NodeKind::Host;
    VirtualTime forwarding_latency = 0;  ///< switches only
    VirtualTime mac_serial_ns = 0;       ///< added at NIC ingress and egress
};

struct LinkSpec {
    std::string a;
    std::string b;
    VirtualTime latency = 0;
    Bandwidth bandwidth{};
};

struct TopologySpec {
    std::vector<NodeSpec> nodes;
    std::vector<LinkSpec> links;

    /// Star of `hosts` (named by `host_names`) around one switch named `hub`.
    static TopologySpec star(const std::vector<std::string>& host_names, const std::string& hub,
                             VirtualTime link_latency, VirtualTime switch_latency, VirtualTime mac_serial_ns = 0);
};

class TopologyError : public std::runtime_error {
public:
    enum class Code { DuplicateNode, DanglingEndpoint, SelfLink, UnknownNode, NoPath };

    TopologyError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

struct Path {
    std::vector<NodeId> nodes;  ///< src ... dst
    std::vector<LinkId> links;
    VirtualTime propagation = 0;  ///< links + intermediate switch forwarding

    bool empty() const noexcept { return nodes.empty(); }
};

/// Immutable network graph with precomputed minimum-latency paths. Packets
/// are only forwarded through switches, never through hosts.
class Topology {
public:
    static std::shared_ptr<const Topology> build(const TopologySpec& spec);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const NodeSpec& node(NodeId id) const { return nodes_.at(id.value); }
    const LinkSpec& link(LinkId id) const { return links_.at(id.value); }
    NodeId id_of(const std::string& name) const;
    bool contains(const std::string& name) const { return by_name_.contains(name); }

    bool has_path(NodeId src, NodeId dst) const;
    /// Throws TopologyError::NoPath when dst is unreachable.
    const Path& path(NodeId src, NodeId dst) const;
    void require_connected(NodeId src, NodeId dst) const { (void)path(src, dst); }

    /// Wire time from src NIC egress to dst NIC ingress for a message of
    /// `size_bytes`: propagation plus serialization on finite-bandwidth links.
    VirtualTime transit(NodeId src, NodeId dst, std::uint64_t size_bytes) const;

private:
    Topology() = default;
    void compute_paths();

    std::vector<NodeSpec> nodes_;
    std::vector<LinkSpec> links_;
    std::vector<LinkId> link_ids_;
    std::map<std::string, NodeId> by_name_;
    std::vector<std::vector<std::pair<NodeId, LinkId>>> adjacency_;
    std::vector<std::vector<Path>> paths_;  ///< [src][dst]
};

}  // namespace reflex::sim
