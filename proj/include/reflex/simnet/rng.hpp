#pragma once

#include "reflex/simnet/types.hpp"

#include <cstdint>
#include <string_view>

namespace reflex::sim {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `text`, folded with `basis`.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Derives an independent sub-seed for a named component. Adding new labels
/// never shifts the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// Counter-based generator: the n-th draw is a pure function of (key, n), so
/// streams are reproducible across platforms and standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    static CounterRng named(std::uint64_t seed, std::string_view label) noexcept {
        return CounterRng(derive_seed(seed, label));
    }

    std::uint64_t next_u64() noexcept;

    /// Uniform double in [0, 1) with 53 bits of precision.
    double next_unit() noexcept;

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Uniform integer in [lo, hi] inclusive.
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) noexcept;

    /// Exponential sample by inverse CDF, rounded to the nearest nanosecond.
    VirtualTime exponential(VirtualTime mean) noexcept;

    bool chance(double p) noexcept { return next_unit() < p; }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace reflex::sim
