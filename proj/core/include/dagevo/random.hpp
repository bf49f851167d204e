#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dagevo {

/// The single random engine used across the library. Every stochastic
/// operation takes one explicitly; there is no global generator.
using Rng = std::mt19937_64;

/// Seeds an independent stream from a base seed and a stream tag.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

/// Uniform integer in the closed range [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Uniform index in [0, n). `n` must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) {
        return false;
    }
    if (p >= 1.0) {
        return true;
    }
    return std::bernoulli_distribution(p)(rng);
}

}  // namespace dagevo
