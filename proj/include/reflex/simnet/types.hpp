#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>

namespace reflex::sim {

/// Virtual time in nanoseconds since simulation start.
using VirtualTime = std::uint64_t;

inline constexpr VirtualTime kNever = std::numeric_limits<VirtualTime>::max();

struct NodeId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const NodeId&) const = default;
};

struct LinkId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const LinkId&) const = default;
};

}  // namespace reflex::sim

template <>
struct std::hash<reflex::sim::NodeId> {
    std::size_t operator()(reflex::sim::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
