#include "reflex/simnet/topology.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace reflex::sim {

VirtualTime Bandwidth::serialization(std::uint64_t size_bytes) const noexcept {
    if (infinite()) {
        return 0;
    }
    __extension__ using u128 = unsigned __int128;
    const u128 num = static_cast<u128>(size_bytes) * 8u * per_ns;
    return static_cast<VirtualTime>((num + bits - 1) / bits);
}

TopologySpec TopologySpec::star(const std::vector<std::string>& host_names, const std::string& hub,
                                VirtualTime link_latency, VirtualTime switch_latency, VirtualTime mac_serial_ns) {
    TopologySpec spec;
    spec.nodes.push_back(NodeSpec{hub, NodeKind::Switch, switch_latency, 0});
    for (const auto& name : host_names) {
        spec.nodes.push_back(NodeSpec{name, NodeKind::Host, 0, mac_serial_ns});
        spec.links.push_back(LinkSpec{name, hub, link_latency, {}});
    }
    return spec;
}

std::shared_ptr<const Topology> Topology::build(const TopologySpec& spec) {
    std::shared_ptr<Topology> topo(new Topology());
    for (const auto& node : spec.nodes) {
        if (topo->by_name_.contains(node.name)) {
            throw TopologyError(TopologyError::Code::DuplicateNode, "duplicate node id '" + node.name + "'");
        }
        topo->by_name_.emplace(node.name, NodeId{static_cast<std::uint32_t>(topo->nodes_.size())});
        topo->nodes_.push_back(node);
    }
    topo->adjacency_.resize(topo->nodes_.size());
    for (const auto& link : spec.links) {
        for (const auto* end : {&link.a, &link.b}) {
            if (!topo->by_name_.contains(*end)) {
                throw TopologyError(TopologyError::Code::DanglingEndpoint,
                                    "link " + link.a + "<->" + link.b + " references unknown node '" + *end + "'");
            }
        }
        if (link.a == link.b) {
            throw TopologyError(TopologyError::Code::SelfLink, "link endpoints must differ: '" + link.a + "'");
        }
        const LinkId id{static_cast<std::uint32_t>(topo->links_.size())};
        topo->links_.push_back(link);
        const NodeId a = topo->by_name_.at(link.a);
        const NodeId b = topo->by_name_.at(link.b);
        topo->adjacency_[a.value].emplace_back(b, id);
        topo->adjacency_[b.value].emplace_back(a, id);
    }
    topo->compute_paths();
    return topo;
}

void Topology::compute_paths() {
    const std::size_t n = nodes_.size();
    paths_.assign(n, std::vector<Path>(n));
    using Entry = std::tuple<VirtualTime, std::uint32_t, std::uint32_t>;  // (cost, hops, node)
    for (std::uint32_t src = 0; src < n; ++src) {
        std::vector<VirtualTime> dist(n, kNever);
        std::vector<std::uint32_t> hops(n, ~0u);
        std::vector<std::int64_t> prev(n, -1);
        std::vector<LinkId> via(n);
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
        dist[src] = 0;
        hops[src] = 0;
        frontier.emplace(0, 0, src);
        while (!frontier.empty()) {
            auto [d, h, u] = frontier.top();
            frontier.pop();
            if (d != dist[u] || h != hops[u]) {
                continue;
            }
            // Only switches relay traffic; a host is a terminal unless it is the source.
            if (u != src && nodes_[u].kind != NodeKind::Switch) {
                continue;
            }
            const VirtualTime forward = (u != src) ? nodes_[u].forwarding_latency : 0;
            for (const auto& [v, link] : adjacency_[u]) {
                const VirtualTime nd = d + forward + links_[link.value].latency;
                const std::uint32_t nh = h + 1;
                if (std::tie(nd, nh) < std::tie(dist[v.value], hops[v.value])) {
                    dist[v.value] = nd;
                    hops[v.value] = nh;
                    prev[v.value] = u;
                    via[v.value] = link;
                    frontier.emplace(nd, nh, v.value);
                }
            }
        }
        for (std::uint32_t dst = 0; dst < n; ++dst) {
            if (dist[dst] == kNever) {
                continue;
            }
            Path p;
            p.propagation = dist[dst];
            for (std::int64_t cur = dst; cur != -1; cur = prev[cur]) {
                p.nodes.push_back(NodeId{static_cast<std::uint32_t>(cur)});
                if (cur != src) {
                    p.links.push_back(via[cur]);
                }
            }
            std::reverse(p.nodes.begin(), p.nodes.end());
            std::reverse(p.links.begin(), p.links.end());
            paths_[src][dst] = std::move(p);
        }
    }
}

NodeId Topology::id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) {
        throw TopologyError(TopologyError::Code::UnknownNode, "unknown node '" + name + "'");
    }
    return it->second;
}

bool Topology::has_path(NodeId src, NodeId dst) const {
    return src.value < nodes_.size() && dst.value < nodes_.size() && !paths_[src.value][dst.value].empty();
}

const Path& Topology::path(NodeId src, NodeId dst) const {
    if (src.value >= nodes_.size() || dst.value >= nodes_.size()) {
        throw TopologyError(TopologyError::Code::UnknownNode, "node id out of range");
    }
    const Path& p = paths_[src.value][dst.value];
    if (p.empty()) {
        throw TopologyError(TopologyError::Code::NoPath,
                            "no path from '" + nodes_[src.value].name + "' to '" + nodes_[dst.value].name + "'");
    }
    return p;
}

VirtualTime Topology::transit(NodeId src, NodeId dst, std::uint64_t size_bytes) const {
    const Path& p = path(src, dst);
    VirtualTime t = p.propagation;
    for (LinkId link : p.links) {
        t += links_[link.value].bandwidth.serialization(size_bytes);
    }
    return t;
}

}  // namespace reflex::sim
