#pragma once

#include "reflex/monitors/command.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace reflex::raft {

using monitor::ElementId;
using sim::VirtualTime;

inline constexpr std::size_t kKeyBytes = 16;
inline constexpr std::size_t kValueBytes = 64;

/// Element 0 addresses the store-wide key space rather than a switch.
inline constexpr ElementId kStoreElement = 0;

struct KvWrite {
    ElementId element = kStoreElement;
    std::string key;    ///< exactly kKeyBytes
    std::string value;  ///< exactly kValueBytes
    bool operator==(const KvWrite&) const = default;
};

/// A write issued by the control plane; uses the reflex command vocabulary.
struct ControlCommand {
    ElementId target = 0;
    monitor::CommandBody body;
    bool operator==(const ControlCommand&) const = default;
};

struct NoOp {
    bool operator==(const NoOp&) const = default;
};

using Payload = std::variant<NoOp, KvWrite, monitor::ReflexCommand, ControlCommand>;

class RaftError : public std::runtime_error {
public:
    enum class Code { InvalidPayload, UnknownElement, NoLeader, Timeout, InvalidConfig };

    RaftError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// Empty string when valid, otherwise the reason.
std::string payload_problem(const Payload& payload);

/// Switch a committed payload must be forwarded to, if any.
std::optional<ElementId> forward_target(const Payload& payload);

/// Canonical byte encoding, used for hashing and size accounting.
std::string encode(const Payload& payload);
std::uint64_t digest(const Payload& payload);

std::uint32_t wire_size(const Payload& payload);

KvWrite make_kv_write(std::string_view key, std::string_view value, ElementId element = kStoreElement);

}  // namespace reflex::raft
