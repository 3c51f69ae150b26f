#include "reflex/simnet/rng.hpp"

#include <cmath>

namespace reflex::sim {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
    return splitmix64(seed ^ splitmix64(fnv1a(label)));
}

std::uint64_t CounterRng::next_u64() noexcept {
    // Two rounds so that adjacent keys do not produce correlated streams.
    return splitmix64(splitmix64(key_) + 0x9e3779b97f4a7c15ULL * ++counter_);
}

double CounterRng::next_unit() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % bound));
    for (;;) {
        const std::uint64_t x = next_u64();
        if (bound == 0) {
            return 0;
        }
        if (x < limit) {
            return x % bound;
        }
    }
}

std::uint64_t CounterRng::uniform(std::uint64_t lo, std::uint64_t hi) noexcept {
    if (hi <= lo) {
        return lo;
    }
    const std::uint64_t span = hi - lo;
    if (span == ~std::uint64_t{0}) {
        return next_u64();
    }
    return lo + below(span + 1);
}

VirtualTime CounterRng::exponential(VirtualTime mean) noexcept {
    if (mean == 0) {
        return 0;
    }
    const double u = next_unit();
    const double x = -static_cast<double>(mean) * std::log1p(-u);
    return static_cast<VirtualTime>(std::llround(x));
}

}  // namespace reflex::sim
