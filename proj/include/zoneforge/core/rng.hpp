#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace zoneforge {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
} // namespace detail

/// Deterministic counter-tracking PRNG: splitmix64 expands the 64-bit seed
/// into the state of a xoshiro256** stream. Identical seed + identical call
/// sequence yields an identical stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = detail::splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        ++counter_;
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms per call.
    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Modulo bias is irrelevant at our n << 2^64.
        return next_u64() % n;
    }

    /// Derive an independent child stream; children with distinct indices are
    /// decorrelated regardless of how much the parent has been consumed.
    Rng split(std::uint64_t index) const {
        std::uint64_t s = seed_ ^ (0x9E3779B97F4A7C15ull * (index + 1));
        return Rng(detail::splitmix64(s));
    }

    /// Raw generator state, for checkpoint provenance.
    const std::uint64_t* state() const { return state_; }
    void restore(const std::uint64_t st[4], std::uint64_t counter) {
        for (int i = 0; i < 4; ++i) state_[i] = st[i];
        counter_ = counter;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t counter_;
    std::uint64_t state_[4];
};

} // namespace zoneforge
