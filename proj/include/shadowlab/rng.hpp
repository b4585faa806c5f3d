#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace shadow {

// Counter-based generator: every draw is a pure function of
// (key, counter), so results never depend on which thread asked first.

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent child key, e.g. the seed of sample `index` under a
/// master seed.
constexpr std::uint64_t split_seed(std::uint64_t parent, std::uint64_t index)
{
    return mix64(mix64(parent + 0x9E3779B97F4A7C15ULL) ^ mix64(index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

class CounterRng {
public:
    constexpr explicit CounterRng(std::uint64_t key) : key_(mix64(key ^ 0x6A09E667F3BCC909ULL)) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const
    {
        return mix64(key_ + mix64(counter + 0x9E3779B97F4A7C15ULL));
    }

    /// Uniform in the open interval (0, 1).
    double uniform(std::uint64_t counter) const
    {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal for slot `index` (Box-Muller, consumes counters 2i and 2i+1).
    double normal(std::uint64_t index) const
    {
        const double u1 = uniform(2 * index);
        const double u2 = uniform(2 * index + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

/// Sequential view over a CounterRng, usable with <random> distributions.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) : rng_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return rng_.bits(counter_++); }
    double uniform() { return rng_.uniform(counter_++); }
    double normal() { return rng_.normal((1ULL << 62) + counter_++); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

} // namespace shadow
