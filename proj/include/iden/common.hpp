#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace iden {

// Finite surrogate for +inf LLRs and the message clip bound. Chosen beyond
// sigmoid/tanh saturation so clipped messages behave like certainties.
inline constexpr double kLlrMax = 30.0;

using BitVec = std::vector<std::uint8_t>;
// Frozen/info flags over the N synthesized channels: 1 = info, 0 = frozen.
using Mask = std::vector<std::uint8_t>;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(int n) {
    if (!is_pow2(n)) throw std::invalid_argument("length must be a power of two, got " + std::to_string(n));
    int l = 0;
    while ((1 << l) < n) ++l;
    return l;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

inline int count_info(const Mask& m) {
    int k = 0;
    for (auto f : m) k += (f != 0);
    return k;
}

// Fit failure with residual diagnostics attached to the message.
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace iden
