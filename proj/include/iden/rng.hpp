#pragma once

#include <cstdint>
#include <random>

namespace iden {

// Every Monte Carlo frame and every training run owns its own generator keyed
// by (seed, stream). Parallel and serial sweeps therefore see identical draws
// no matter how frames are scheduled across threads.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32),
                      std::uint32_t(stream & 0xffffffffu), std::uint32_t(stream >> 32),
                      0x9e3779b9u};
    return std::mt19937_64(seq);
}

inline double gauss(std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> d(0.0, stddev);
    return d(rng);
}

inline double uniform01(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(rng);
}

} // namespace iden
