#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace mst {

/// Deterministic splitmix64 generator. The raw u64 sequence depends only on the
/// seed and is identical on every platform; floating-point helpers are simple
/// exact transforms of those draws. std::mt19937 / std::*_distribution are
/// avoided on purpose: their output is not pinned across standard libraries.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1], used where log() must not see zero.
    double next_double_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Box-Muller; consumes exactly two u64 draws per call, no caching.
    double normal(double mean, double stddev) {
        const double u1 = next_double_open();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Prng::below: n must be positive");
        std::size_t v = static_cast<std::size_t>(next_double() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Sattolo's algorithm: a uniformly random cyclic permutation of
    /// {0..n-1}. Every cycle is a derangement, which is exactly what the
    /// adversarial source-shuffling needs. Requires n >= 2.
    std::vector<std::size_t> derangement(std::size_t n) {
        if (n < 2) throw std::invalid_argument("Prng::derangement: need at least 2 elements");
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) {
            std::size_t j = below(i); // j in [0, i): never the fixed point
            std::swap(p[i], p[j]);
        }
        return p;
    }

private:
    std::uint64_t state_;
};

} // namespace mst
