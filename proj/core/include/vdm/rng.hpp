#pragma once

#include <cstdint>

namespace vdm {

// Seedable, splittable PRNG used everywhere randomness is needed so that runs
// are reproducible from a single u64 seed (and portable to other-language
// reimplementations: both algorithms below are published reference code).
//
// Algorithm: xoshiro256++ 1.0, state expanded from the seed with splitmix64.
// split(stream) derives an independent child generator from the *original*
// seed and the stream id, never from the current state, so the set of child
// streams does not depend on how much the parent has been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    /// Child generator for an independent named stream.
    Rng split(std::uint64_t stream) const {
        return Rng(mix(seed_, stream));
    }

    std::uint64_t seed() const { return seed_; }

    /// Next raw 64-bit value (xoshiro256++).
    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        return next_u64() % n;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        return splitmix64(x);
    }

    std::uint64_t seed_;
    std::uint64_t state_[4];
};

} // namespace vdm
