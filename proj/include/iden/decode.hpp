#pragma once

#include "iden/common.hpp"

#include <optional>

namespace iden::dec {

// Runtime operation counters. The accounting convention is the one used by
// the complexity table in mc::count_ops: additions count the additive
// message combinations of the factor-graph updates, multiplications count
// weight scalings plus hypernetwork MAC multiplies, and memory counts the
// materialized weight/staging slots of a decode call (channel message
// lattices are common to all decoders and excluded).
struct OpCounters {
    std::uint64_t additions = 0;
    std::uint64_t multiplications = 0;
    std::uint64_t memory_slots = 0;
};

// sign(a) sign(b) min(|a|,|b|) with sign(0) = +1. The subgradient used in
// training: derivative w.r.t. the smaller-magnitude argument equals the sign
// of the other, zero w.r.t. the larger; ties attribute to the first argument.
inline double g_minsum(double a, double b) {
    double s = ((a < 0.0) != (b < 0.0)) ? -1.0 : 1.0;
    return s * std::min(std::fabs(a), std::fabs(b));
}

// Left/right message lattices over (n+1) layers x N positions. Layer 0 is the
// u side (right-going messages seeded by the frozen mask), layer n the c side
// (left-going messages seeded by the channel LLRs).
struct BpState {
    int n = 0; // stages = log2 N
    int N = 0;
    std::vector<double> L; // (n+1) * N, idx(layer, pos)
    std::vector<double> R;

    double& l(int layer, int pos) { return L[layer * N + pos]; }
    double& r(int layer, int pos) { return R[layer * N + pos]; }
    double l(int layer, int pos) const { return L[layer * N + pos]; }
    double r(int layer, int pos) const { return R[layer * N + pos]; }
};

// Per-(stage, position) scaling factors, shared across iterations. alpha
// scales the right-to-left (L) updates written at layer s, beta the
// left-to-right (R) updates written at layer s+1. All-ones reduces every
// update to plain min-sum.
struct BpWeights {
    int n = 0;
    int N = 0;
    std::vector<double> alpha; // n * N
    std::vector<double> beta;  // n * N

    static BpWeights ones(int n_stages, int n_bits);
    std::size_t size() const { return alpha.size() + beta.size(); }
};

// Per-iteration weight sets (the non-recurrent trained decoder): set t is
// used at iteration t+1, so storage grows linearly with T.
struct IterWeights {
    std::vector<BpWeights> per_iter;
};

// Iteration-indexed weight generator: a small dense net (tanh hiddens, linear
// output, no biases) mapping the normalized iteration index t/T to one raw
// scale per processing element and direction. Raw scales map to weights via
// exp(), so a zero net emits all-ones (plain min-sum). The same per-PE scale
// is applied to both outputs of a PE, which keeps the generated parameter
// count at N log2 N per decode graph.
struct HyperNet {
    int n = 0;       // code stages
    int N = 0;       // code length
    int k_h = 8;     // hidden width
    int L = 3;       // hidden layer count
    int T = 6;       // training horizon used to normalize t
    // layers: 1 -> k_h, (L-1) x (k_h -> k_h), k_h -> n*N; row-major out x in.
    std::vector<std::vector<double>> W;

    static HyperNet make(int n_bits, int k_h, int hidden_layers, int T, std::uint64_t seed);
    int raw_size() const { return n * N; }
    std::size_t weight_count() const;

    // Raw output for iteration t (1-based, t <= T), before the exp map.
    std::vector<double> forward_raw(int t, OpCounters* counters = nullptr) const;
    // Materialized alpha/beta lattices for iteration t.
    BpWeights forward(int t, OpCounters* counters = nullptr) const;
};

struct BpResult {
    BitVec info_bits;         // hard decisions at info positions, in order
    BitVec u_hard;            // hard decisions at all N positions
    std::vector<double> soft; // sigmoid(R_0 + L_0) at all N positions
};

// Seed the lattices: r(0, j) = kLlrMax at frozen j, 0 at info j;
// l(n, j) = channel LLR (clipped); everything else 0.
BpState bp_init(const std::vector<double>& channel_llrs, const Mask& mask);

// T iterations of scaled min-sum message passing over the natural-order
// factor graph. Each iteration runs one left-to-right pass (stages 0..n-1,
// writing layer s+1 R messages in place) followed by one right-to-left pass
// (stages n-1..0, writing layer s L messages in place). Messages are clipped
// to [-kLlrMax, kLlrMax] after every update. Soft outputs are
// sigmoid(R + L) at layer 0 under the LLR convention log p(0)/p(1); hard
// bit = 1 iff soft < 0.5.
BpResult bp_decode(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                   const BpWeights& weights, OpCounters* counters = nullptr);

// Plain min-sum BP: no scaling multiplications at all.
BpResult bp_decode_plain(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                         OpCounters* counters = nullptr);

// Per-iteration trained weights (iterations beyond the stored sets reuse the
// last set; T_test <= stored T never does).
BpResult bp_decode_iterweights(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                               const IterWeights& w, OpCounters* counters = nullptr);

// Weighted BP whose iteration-t weights come from hypernet.forward(t).
// Weight buffers are reused across iterations, so the footprint is
// independent of T.
BpResult hyper_bp_decode(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                         const HyperNet& net, OpCounters* counters = nullptr);

struct ScOptions {
    bool exact_f = false; // boxplus check update instead of min-sum
};

struct ScResult {
    BitVec info_bits;
    BitVec u_hard;
};

// Successive cancellation with f = min-sum (or exact boxplus) and
// g(a, b, u) = b + (1 - 2u) a; frozen positions forced to zero.
ScResult sc_decode(const std::vector<double>& channel_llrs, const Mask& mask, ScOptions opts = {});

// LLR-based list decoding with the penalty path metric (|L| added when the
// chosen bit disagrees with the decision LLR's sign). Pruning is a stable
// sort on (metric, path index), so results are deterministic. list_size = 1
// reproduces sc_decode bit-exactly.
ScResult scl_decode(const std::vector<double>& channel_llrs, const Mask& mask, int list_size,
                    ScOptions opts = {});

} // namespace iden::dec
