#include "iden/decode.hpp"

#include "iden/rng.hpp"

#include <algorithm>
#include <cmath>

namespace iden::dec {

BpWeights BpWeights::ones(int n_stages, int n_bits) {
    BpWeights w;
    w.n = n_stages;
    w.N = n_bits;
    w.alpha.assign((size_t)n_stages * n_bits, 1.0);
    w.beta.assign((size_t)n_stages * n_bits, 1.0);
    return w;
}

BpState bp_init(const std::vector<double>& channel_llrs, const Mask& mask) {
    if (channel_llrs.size() != mask.size()) throw std::invalid_argument("bp_init: LLR/mask length mismatch");
    const int N = (int)mask.size();
    const int n = log2_exact(N);
    BpState st;
    st.n = n;
    st.N = N;
    st.L.assign((size_t)(n + 1) * N, 0.0);
    st.R.assign((size_t)(n + 1) * N, 0.0);
    for (int j = 0; j < N; ++j) {
        st.r(0, j) = mask[j] ? 0.0 : kLlrMax;
        st.l(n, j) = clip(channel_llrs[j], -kLlrMax, kLlrMax);
    }
    return st;
}

namespace {

// One full iteration: left-to-right pass (stages 0..n-1 write layer s+1 R
// messages) then right-to-left pass (stages n-1..0 write layer s L messages),
// both in place so information propagates across the whole graph per
// iteration, as in the unrolled network view of the decoder. alpha/beta may
// be null (plain min-sum, no scaling multiplications).
void bp_iteration(BpState& st, const double* alpha, const double* beta, OpCounters* counters) {
    const int n = st.n, N = st.N;
    std::uint64_t adds = 0, mults = 0;
    for (int s = 0; s < n; ++s) {
        const int delta = N >> (s + 1);
        const double* bet = beta ? beta + (size_t)s * N : nullptr;
        for (int j = 0; j < N; ++j) {
            if (j & delta) continue;
            const int jl = j + delta;
            const double ru = st.r(s, j), rl = st.r(s, jl);
            const double lu = st.l(s + 1, j), ll = st.l(s + 1, jl);
            double g_u = g_minsum(ru, ll + rl);
            double g_l = g_minsum(ru, lu);
            adds += 2;
            if (bet) {
                g_u *= bet[j];
                g_l *= bet[jl];
                mults += 2;
            }
            st.r(s + 1, j) = clip(g_u, -kLlrMax, kLlrMax);
            st.r(s + 1, jl) = clip(g_l + rl, -kLlrMax, kLlrMax);
        }
    }
    for (int s = n - 1; s >= 0; --s) {
        const int delta = N >> (s + 1);
        const double* alp = alpha ? alpha + (size_t)s * N : nullptr;
        for (int j = 0; j < N; ++j) {
            if (j & delta) continue;
            const int jl = j + delta;
            const double ru = st.r(s, j), rl = st.r(s, jl);
            const double lu = st.l(s + 1, j), ll = st.l(s + 1, jl);
            double g_u = g_minsum(lu, ll + rl);
            double g_l = g_minsum(ru, lu);
            adds += 2;
            if (alp) {
                g_u *= alp[j];
                g_l *= alp[jl];
                mults += 2;
            }
            st.l(s, j) = clip(g_u, -kLlrMax, kLlrMax);
            st.l(s, jl) = clip(g_l + ll, -kLlrMax, kLlrMax);
        }
    }
    if (counters) {
        counters->additions += adds;
        counters->multiplications += mults;
    }
}

BpResult bp_finalize(const BpState& st, const Mask& mask) {
    const int N = st.N;
    BpResult res;
    res.soft.resize(N);
    res.u_hard.resize(N);
    for (int j = 0; j < N; ++j) {
        const double d = st.r(0, j) + st.l(0, j);
        res.soft[j] = sigmoid(d);
        res.u_hard[j] = res.soft[j] < 0.5 ? 1 : 0;
    }
    res.info_bits.reserve(count_info(mask));
    for (int j = 0; j < N; ++j)
        if (mask[j]) res.info_bits.push_back(res.u_hard[j]);
    return res;
}

void check_iterations(int iterations) {
    if (iterations < 1) throw std::invalid_argument("bp decode: iteration count must be >= 1");
}

} // namespace

BpResult bp_decode(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                   const BpWeights& weights, OpCounters* counters) {
    check_iterations(iterations);
    BpState st = bp_init(channel_llrs, mask);
    if (weights.n != st.n || weights.N != st.N) throw std::invalid_argument("bp_decode: weight shape mismatch");
    if (counters) counters->memory_slots += weights.size();
    for (int t = 1; t <= iterations; ++t)
        bp_iteration(st, weights.alpha.data(), weights.beta.data(), counters);
    return bp_finalize(st, mask);
}

BpResult bp_decode_plain(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                         OpCounters* counters) {
    check_iterations(iterations);
    BpState st = bp_init(channel_llrs, mask);
    for (int t = 1; t <= iterations; ++t)
        bp_iteration(st, nullptr, nullptr, counters);
    return bp_finalize(st, mask);
}

BpResult bp_decode_iterweights(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                               const IterWeights& w, OpCounters* counters) {
    check_iterations(iterations);
    if (w.per_iter.empty()) throw std::invalid_argument("bp_decode_iterweights: no weight sets");
    BpState st = bp_init(channel_llrs, mask);
    if (counters)
        for (const auto& set : w.per_iter) counters->memory_slots += set.size();
    for (int t = 1; t <= iterations; ++t) {
        const auto& set = w.per_iter[std::min<size_t>(t - 1, w.per_iter.size() - 1)];
        if (set.n != st.n || set.N != st.N) throw std::invalid_argument("bp_decode_iterweights: weight shape mismatch");
        bp_iteration(st, set.alpha.data(), set.beta.data(), counters);
    }
    return bp_finalize(st, mask);
}

// ---- hypernetwork ----------------------------------------------------------

HyperNet HyperNet::make(int n_bits, int k_h, int hidden_layers, int T, std::uint64_t seed) {
    HyperNet net;
    net.N = n_bits;
    net.n = log2_exact(n_bits);
    net.k_h = k_h;
    net.L = hidden_layers;
    net.T = T;
    auto rng = make_rng(seed, 0x48595045);
    auto glorot = [&](int out, int in) {
        std::vector<double> w((size_t)out * in);
        const double lim = std::sqrt(6.0 / (in + out));
        for (auto& x : w) x = (uniform01(rng) * 2.0 - 1.0) * lim;
        return w;
    };
    net.W.push_back(glorot(k_h, 1));
    for (int i = 1; i < hidden_layers; ++i) net.W.push_back(glorot(k_h, k_h));
    net.W.push_back(glorot(net.raw_size(), k_h));
    return net;
}

std::size_t HyperNet::weight_count() const {
    std::size_t c = 0;
    for (const auto& w : W) c += w.size();
    return c;
}

std::vector<double> HyperNet::forward_raw(int t, OpCounters* counters) const {
    if (t < 1 || t > T) throw std::invalid_argument("hypernet: iteration index out of range");
    const double x = (double)t / (double)T;
    std::uint64_t mults = 0;
    std::vector<double> h(k_h);
    for (int i = 0; i < k_h; ++i) h[i] = std::tanh(W[0][i] * x);
    mults += (std::uint64_t)k_h;
    std::vector<double> next(k_h);
    for (int layer = 1; layer < L; ++layer) {
        const auto& w = W[layer];
        for (int o = 0; o < k_h; ++o) {
            double acc = 0.0;
            for (int i = 0; i < k_h; ++i) acc += w[(size_t)o * k_h + i] * h[i];
            next[o] = std::tanh(acc);
        }
        mults += (std::uint64_t)k_h * k_h;
        h.swap(next);
    }
    const auto& wout = W.back();
    std::vector<double> raw(raw_size());
    for (int o = 0; o < raw_size(); ++o) {
        double acc = 0.0;
        for (int i = 0; i < k_h; ++i) acc += wout[(size_t)o * k_h + i] * h[i];
        raw[o] = acc;
    }
    mults += (std::uint64_t)raw_size() * k_h;
    if (counters) counters->multiplications += mults;
    return raw;
}

namespace {

// Expand the raw per-PE scales into full alpha/beta lattices: PE p of stage s
// holds its L scale at raw[s*N + 2p] and its R scale at raw[s*N + 2p + 1];
// both outputs of a PE share the same scale.
void expand_raw(const std::vector<double>& raw, int n, int N, std::vector<double>& alpha,
                std::vector<double>& beta) {
    for (int s = 0; s < n; ++s) {
        const int delta = N >> (s + 1);
        int p = 0;
        for (int j = 0; j < N; ++j) {
            if (j & delta) continue;
            const double a = std::exp(raw[(size_t)s * N + 2 * p]);
            const double b = std::exp(raw[(size_t)s * N + 2 * p + 1]);
            alpha[(size_t)s * N + j] = a;
            alpha[(size_t)s * N + j + delta] = a;
            beta[(size_t)s * N + j] = b;
            beta[(size_t)s * N + j + delta] = b;
            ++p;
        }
    }
}

} // namespace

BpWeights HyperNet::forward(int t, OpCounters* counters) const {
    BpWeights w;
    w.n = n;
    w.N = N;
    w.alpha.assign((size_t)n * N, 1.0);
    w.beta.assign((size_t)n * N, 1.0);
    const auto raw = forward_raw(t, counters);
    expand_raw(raw, n, N, w.alpha, w.beta);
    return w;
}

BpResult hyper_bp_decode(const std::vector<double>& channel_llrs, const Mask& mask, int iterations,
                         const HyperNet& net, OpCounters* counters) {
    check_iterations(iterations);
    BpState st = bp_init(channel_llrs, mask);
    if (net.n != st.n || net.N != st.N) throw std::invalid_argument("hyper_bp_decode: net shape mismatch");
    // Footprint is T-independent: one alpha lattice, one beta lattice, the raw
    // staging buffer and the hypernet's hidden activations, all reused per
    // iteration.
    std::vector<double> alpha((size_t)st.n * st.N), beta((size_t)st.n * st.N);
    if (counters)
        counters->memory_slots += alpha.size() + beta.size() + (std::uint64_t)net.raw_size() +
                                  (std::uint64_t)net.k_h * net.L;
    for (int t = 1; t <= iterations; ++t) {
        const auto raw = net.forward_raw(t, counters);
        expand_raw(raw, st.n, st.N, alpha, beta);
        bp_iteration(st, alpha.data(), beta.data(), counters);
    }
    return bp_finalize(st, mask);
}

// ---- successive cancellation -----------------------------------------------

namespace {

double f_fun(double a, double b, bool exact) {
    if (!exact) return g_minsum(a, b);
    const double t = clip(std::tanh(a / 2.0) * std::tanh(b / 2.0), -1.0 + 1e-15, 1.0 - 1e-15);
    return 2.0 * std::atanh(t);
}

double g_fun(double a, double b, std::uint8_t u) { return u ? b - a : b + a; }

struct ScNode {
    const Mask* mask;
    bool exact_f;
    BitVec u;

    // Decodes the subtree spanning u positions [base, base+m); alpha holds the
    // subtree's input LLRs, and the return value is the subtree's codeword.
    BitVec run(int base, int m, std::vector<double> alpha) {
        if (m == 1) {
            std::uint8_t bit = 0;
            if ((*mask)[base]) bit = alpha[0] < 0.0 ? 1 : 0;
            u[base] = bit;
            return {bit};
        }
        const int h = m / 2;
        std::vector<double> child(h);
        for (int i = 0; i < h; ++i) child[i] = f_fun(alpha[i], alpha[i + h], exact_f);
        BitVec left = run(base, h, child);
        for (int i = 0; i < h; ++i) child[i] = g_fun(alpha[i], alpha[i + h], left[i]);
        BitVec right = run(base + h, h, child);
        BitVec beta(m);
        for (int i = 0; i < h; ++i) {
            beta[i] = left[i] ^ right[i];
            beta[i + h] = right[i];
        }
        return beta;
    }
};

} // namespace

ScResult sc_decode(const std::vector<double>& channel_llrs, const Mask& mask, ScOptions opts) {
    const int N = (int)mask.size();
    log2_exact(N);
    if (channel_llrs.size() != mask.size()) throw std::invalid_argument("sc_decode: LLR/mask length mismatch");
    ScNode node{&mask, opts.exact_f, BitVec(N, 0)};
    node.run(0, N, channel_llrs);
    ScResult res;
    res.u_hard = std::move(node.u);
    for (int j = 0; j < N; ++j)
        if (mask[j]) res.info_bits.push_back(res.u_hard[j]);
    return res;
}

// ---- successive cancellation list ------------------------------------------

namespace {

struct Path {
    double metric = 0.0;
    BitVec u;
    // Per-recursion-node value stacks. Cloning a path at a fork copies the
    // whole stack, so enclosing recursion frames see the forked state.
    std::vector<std::vector<double>> alphas;
    std::vector<BitVec> lefts;
    BitVec ret;
};

struct SclState {
    const Mask* mask;
    bool exact_f;
    int list_size;
    std::vector<Path> paths;

    void prune() {
        if ((int)paths.size() <= list_size) return;
        std::vector<int> order(paths.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return paths[a].metric < paths[b].metric; });
        std::vector<Path> kept;
        kept.reserve(list_size);
        for (int i = 0; i < list_size; ++i) kept.push_back(std::move(paths[order[i]]));
        paths.swap(kept);
    }

    void run(int base, int m) {
        if (m == 1) {
            if ((*mask)[base]) {
                std::vector<Path> next;
                next.reserve(paths.size() * 2);
                for (auto& p : paths) {
                    const double llr = p.alphas.back()[0];
                    Path p1 = p; // u = 1 branch
                    p.metric += llr < 0.0 ? -llr : 0.0;
                    p.u[base] = 0;
                    p.ret = {0};
                    p1.metric += llr >= 0.0 ? llr : 0.0;
                    p1.u[base] = 1;
                    p1.ret = {1};
                    next.push_back(std::move(p));
                    next.push_back(std::move(p1));
                }
                paths.swap(next);
                prune();
            } else {
                for (auto& p : paths) {
                    const double llr = p.alphas.back()[0];
                    p.metric += llr < 0.0 ? -llr : 0.0;
                    p.u[base] = 0;
                    p.ret = {0};
                }
            }
            return;
        }
        const int h = m / 2;
        for (auto& p : paths) {
            const auto& a = p.alphas.back();
            std::vector<double> child(h);
            for (int i = 0; i < h; ++i) child[i] = f_fun(a[i], a[i + h], exact_f);
            p.alphas.push_back(std::move(child));
        }
        run(base, h);
        for (auto& p : paths) {
            p.alphas.pop_back();
            p.lefts.push_back(std::move(p.ret));
            const auto& a = p.alphas.back();
            const auto& left = p.lefts.back();
            std::vector<double> child(h);
            for (int i = 0; i < h; ++i) child[i] = g_fun(a[i], a[i + h], left[i]);
            p.alphas.push_back(std::move(child));
        }
        run(base + h, h);
        for (auto& p : paths) {
            p.alphas.pop_back();
            BitVec left = std::move(p.lefts.back());
            p.lefts.pop_back();
            BitVec beta(m);
            for (int i = 0; i < h; ++i) {
                beta[i] = left[i] ^ p.ret[i];
                beta[i + h] = p.ret[i];
            }
            p.ret = std::move(beta);
        }
    }
};

} // namespace

ScResult scl_decode(const std::vector<double>& channel_llrs, const Mask& mask, int list_size,
                    ScOptions opts) {
    if (list_size < 1) throw std::invalid_argument("scl_decode: list size must be >= 1");
    const int N = (int)mask.size();
    log2_exact(N);
    if (channel_llrs.size() != mask.size()) throw std::invalid_argument("scl_decode: LLR/mask length mismatch");
    SclState st{&mask, opts.exact_f, list_size, {}};
    Path root;
    root.u.assign(N, 0);
    root.alphas.push_back(channel_llrs);
    st.paths.push_back(std::move(root));
    st.run(0, N);
    int best = 0;
    for (size_t i = 1; i < st.paths.size(); ++i)
        if (st.paths[i].metric < st.paths[best].metric) best = (int)i;
    ScResult res;
    res.u_hard = std::move(st.paths[best].u);
    for (int j = 0; j < N; ++j)
        if (mask[j]) res.info_bits.push_back(res.u_hard[j]);
    return res;
}

} // namespace iden::dec
