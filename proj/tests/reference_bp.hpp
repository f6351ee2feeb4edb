#pragma once

// Test-only reference decoder: a straightforward, separately written scaled
// min-sum message-passing implementation over explicit 2-D arrays. Used as
// the independent oracle for the production kernel.

#include "iden/common.hpp"

#include <cmath>
#include <vector>

namespace ref_bp {

inline double g(double a, double b) {
    const double sa = a < 0 ? -1.0 : 1.0;
    const double sb = b < 0 ? -1.0 : 1.0;
    return sa * sb * std::min(std::fabs(a), std::fabs(b));
}

inline double clamp(double x) {
    if (x > iden::kLlrMax) return iden::kLlrMax;
    if (x < -iden::kLlrMax) return -iden::kLlrMax;
    return x;
}

// weights: alpha/beta lattices sized stages x N (empty = all ones).
inline std::vector<std::uint8_t> decode(const std::vector<double>& chan, const iden::Mask& mask,
                                        int iterations,
                                        const std::vector<std::vector<double>>& alpha = {},
                                        const std::vector<std::vector<double>>& beta = {}) {
    const int N = (int)mask.size();
    int n = 0;
    while ((1 << n) < N) ++n;
    std::vector<std::vector<double>> L(n + 1, std::vector<double>(N, 0.0));
    std::vector<std::vector<double>> R(n + 1, std::vector<double>(N, 0.0));
    for (int j = 0; j < N; ++j) {
        R[0][j] = mask[j] ? 0.0 : iden::kLlrMax;
        L[n][j] = clamp(chan[j]);
    }
    auto a_of = [&](int s, int j) { return alpha.empty() ? 1.0 : alpha[s][j]; };
    auto b_of = [&](int s, int j) { return beta.empty() ? 1.0 : beta[s][j]; };
    for (int t = 0; t < iterations; ++t) {
        for (int s = 0; s < n; ++s) {
            const int d = N >> (s + 1);
            for (int j = 0; j < N; ++j) {
                if (j & d) continue;
                const double ru = R[s][j], rl = R[s][j + d];
                const double lu = L[s + 1][j], ll = L[s + 1][j + d];
                R[s + 1][j] = clamp(b_of(s, j) * g(ru, ll + rl));
                R[s + 1][j + d] = clamp(b_of(s, j + d) * g(ru, lu) + rl);
            }
        }
        for (int s = n - 1; s >= 0; --s) {
            const int d = N >> (s + 1);
            for (int j = 0; j < N; ++j) {
                if (j & d) continue;
                const double ru = R[s][j], rl = R[s][j + d];
                const double lu = L[s + 1][j], ll = L[s + 1][j + d];
                L[s][j] = clamp(a_of(s, j) * g(lu, ll + rl));
                L[s][j + d] = clamp(a_of(s, j + d) * g(ru, lu) + ll);
            }
        }
    }
    std::vector<std::uint8_t> bits;
    for (int j = 0; j < N; ++j)
        if (mask[j]) bits.push_back(R[0][j] + L[0][j] < 0.0 ? 1 : 0);
    return bits;
}

} // namespace ref_bp
