#pragma once

#include <cstdint>

namespace vtprune {

/// Counter-based pseudo-random generator (SplitMix64).
///
/// The k-th output (k = 0, 1, ...) is a pure function of the seed:
///
///     x = seed + (k + 1) * 0x9E3779B97F4A7C15   (mod 2^64)
///     x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
///     x ^= x >> 27;  x *= 0x94D049BB133111EB
///     x ^= x >> 31
///
/// so any implementation of this recipe, in any language, reproduces the
/// stream exactly. Doubles take the top 53 bits of the integer output,
/// giving values in [0, 1).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64() {
        std::uint64_t x = seed_ + (++counter_) * GAMMA;
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is negligible for the small n used here.
        return next_u64() % n;
    }

    /// Child generator with an independent, reproducible stream.
    SeededRng fork(std::uint64_t stream) const {
        std::uint64_t x = seed_ ^ (0xBF58476D1CE4E5B9ULL + stream * GAMMA);
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return SeededRng(x);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ULL;

    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace vtprune
