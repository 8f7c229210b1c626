#ifndef SAMCIRT_RANDOM_HPP
#define SAMCIRT_RANDOM_HPP

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so values do not depend on evaluation order or
// thread count. The mixer is SplitMix64's finalizer.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace samcirt::random {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return mix64(mix64(seed) ^ mix64(stream * 0xd1b54a32d192ed03ULL + counter));
}

/// Uniform on [0, 1).
constexpr double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return double(bits(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on the counter pair (2c, 2c + 1).
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    const double u1 = 1.0 - uniform(seed, stream, 2 * counter);
    const double u2 = uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential convenience wrapper over one stream.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    double uniform() noexcept { return random::uniform(seed_, stream_, counter_++); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept { return random::normal(seed_, stream_, counter_++); }

private:
    std::uint64_t seed_, stream_, counter_ = 0;
};

} // namespace samcirt::random

#endif // SAMCIRT_RANDOM_HPP
