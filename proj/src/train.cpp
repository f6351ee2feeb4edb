#include "iden/train.hpp"

#include "iden/rng.hpp"

#include <algorithm>
#include <cmath>

namespace iden::learn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// ---- losses -----------------------------------------------------------------

LossWeights LossWeights::defaults(double p_targ, double r_targ_value) {
    LossWeights w;
    w.p_targ_mw = p_targ;
    w.r_targ = r_targ_value;
    w.lambda = 0.01 * p_targ;
    return w;
}

namespace {
constexpr double kProbEps = 1e-7;
constexpr double kPowerFloor = 1e-6;
} // namespace

double loss_wit(const std::vector<double>& b, const std::vector<double>& b_hat) {
    if (b.size() != b_hat.size()) throw std::invalid_argument("loss_wit: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < b.size(); ++i) {
        const double p = clip(b_hat[i], kProbEps, 1.0 - kProbEps);
        s += b[i] * std::log(p) + (1.0 - b[i]) * std::log(1.0 - p);
    }
    return s;
}

double loss_wet(double p_out_mw, const LossWeights& w) {
    if (p_out_mw <= 0.0) throw std::domain_error("loss_wet: harvested power must be positive");
    const double p = std::max(p_out_mw, kPowerFloor);
    const double d = w.p_targ_mw - p;
    return w.lambda / p + d + d * d;
}

double loss_rate(const std::vector<double>& f_soft, const LossWeights& w) {
    const double d = polar::rate_of(f_soft) - w.r_targ;
    return d * d;
}

double loss_total(const std::vector<double>& wit_ll_per_frame,
                  const std::vector<double>& p_out_per_frame, const std::vector<double>& f_soft,
                  const LossWeights& w) {
    if (wit_ll_per_frame.size() != p_out_per_frame.size())
        throw std::invalid_argument("loss_total: batch size mismatch");
    const double rate_pen = loss_rate(f_soft, w);
    double acc = 0.0;
    for (size_t i = 0; i < wit_ll_per_frame.size(); ++i) {
        const double p = std::max(p_out_per_frame[i], kPowerFloor);
        const double d = w.p_targ_mw - p;
        acc += -wit_ll_per_frame[i] + w.beta1 * w.lambda / p + w.beta2 * d + w.beta3 * d * d +
               w.beta4 * rate_pen;
    }
    return acc / (double)wit_ll_per_frame.size();
}

Var tape_loss_wit(Tape& tp, const std::vector<double>& b, Var b_hat) {
    const Tensor& t = tp.val(b_hat);
    if ((int)b.size() != t.size()) throw std::invalid_argument("tape_loss_wit: shape mismatch");
    Tensor bt(t.rows, t.cols);
    bt.v = b;
    Var bc = tp.constant(bt);
    Var p = tp.clip_(b_hat, kProbEps, 1.0 - kProbEps);
    Var one_minus = tp.add_scalar(tp.neg(p), 1.0);
    Var bc1 = tp.add_scalar(tp.neg(bc), 1.0);
    Var ll = tp.add(tp.mul(tp.log_(p), bc), tp.mul(tp.log_(one_minus), bc1));
    return tp.sum_all(ll);
}

Var tape_loss_wet(Tape& tp, Var p_out, const LossWeights& w) {
    const int rows = tp.val(p_out).rows, cols = tp.val(p_out).cols;
    Var p = tp.clip_(p_out, kPowerFloor, 1e12);
    Var lam = tp.constant(Tensor(rows, cols, w.lambda));
    Var part1 = tp.div(lam, p);
    Var diff = tp.add_scalar(tp.neg(p), w.p_targ_mw);
    return tp.add(part1, tp.add(diff, tp.mul(diff, diff)));
}

Var tape_loss_rate(Tape& tp, Var f_soft, const LossWeights& w) {
    Var r = tp.mean_all(tp.sigmoid_(f_soft));
    Var d = tp.add_scalar(r, -w.r_targ);
    return tp.mul(d, d);
}

Var tape_loss_total(Tape& tp, const Tensor& bits, Var b_hat, Var p_out, Var f_soft,
                    const LossWeights& w) {
    Var bc = tp.constant(bits);
    Var p = tp.clip_(b_hat, kProbEps, 1.0 - kProbEps);
    Var one_minus = tp.add_scalar(tp.neg(p), 1.0);
    Var bc1 = tp.add_scalar(tp.neg(bc), 1.0);
    Var ll = tp.add(tp.mul(tp.log_(p), bc), tp.mul(tp.log_(one_minus), bc1));
    Var ce_frame = tp.neg(tp.row_sum(ll));
    const int prows = tp.val(p_out).rows, pcols = tp.val(p_out).cols;
    Var pf = tp.clip_(p_out, kPowerFloor, 1e12);
    Var lam = tp.constant(Tensor(prows, pcols, w.lambda));
    Var part1 = tp.div(lam, pf);
    Var diff = tp.add_scalar(tp.neg(pf), w.p_targ_mw);
    Var per_frame = tp.add(
        ce_frame, tp.add(tp.scale(part1, w.beta1),
                         tp.add(tp.scale(diff, w.beta2), tp.scale(tp.mul(diff, diff), w.beta3))));
    Var rate_pen = tp.scale(tape_loss_rate(tp, f_soft, w), w.beta4);
    return tp.add(tp.mean_all(per_frame), rate_pen);
}

// ---- parameters and optimizers ------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    for (auto& [n, _] : items)
        if (n == name) throw std::invalid_argument("ParamStore: duplicate name " + name);
    items.emplace_back(name, std::move(t));
    return items.back().second;
}

Tensor& ParamStore::find(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return t;
    throw std::invalid_argument("ParamStore: unknown name " + name);
}

const Tensor& ParamStore::find(const std::string& name) const {
    for (auto& [n, t] : items)
        if (n == name) return t;
    throw std::invalid_argument("ParamStore: unknown name " + name);
}

bool ParamStore::has(const std::string& name) const {
    for (auto& [n, _] : items)
        if (n == name) return true;
    return false;
}

namespace {

void check_finite(const std::string& name, const Tensor& g) {
    for (double x : g.v)
        if (!std::isfinite(x))
            throw std::runtime_error("optimizer: non-finite gradient for parameter " + name);
}

} // namespace

void Sgd::step(ParamStore& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.items.size()) throw std::invalid_argument("sgd: gradient count mismatch");
    for (size_t i = 0; i < grads.size(); ++i) {
        check_finite(params.items[i].first, grads[i]);
        auto& t = params.items[i].second;
        for (int j = 0; j < t.size(); ++j) t.v[j] -= lr * grads[i].v[j];
    }
}

void Adam::step(ParamStore& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.items.size()) throw std::invalid_argument("adam: gradient count mismatch");
    if (m.empty()) {
        m.resize(grads.size());
        v.resize(grads.size());
        for (size_t i = 0; i < grads.size(); ++i) {
            m[i].assign(grads[i].v.size(), 0.0);
            v[i].assign(grads[i].v.size(), 0.0);
        }
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (size_t i = 0; i < grads.size(); ++i) {
        check_finite(params.items[i].first, grads[i]);
        auto& p = params.items[i].second;
        for (int j = 0; j < p.size(); ++j) {
            const double g = grads[i].v[j];
            m[i][j] = b1 * m[i][j] + (1.0 - b1) * g;
            v[i][j] = b2 * v[i][j] + (1.0 - b2) * g * g;
            p.v[j] -= lr * (m[i][j] / c1) / (std::sqrt(v[i][j] / c2) + eps);
        }
    }
}

// ---- tape mirrors --------------------------------------------------------------

TapeMlp TapeMlp::from_mlp(Tape& tp, const nn::Mlp& net, bool trainable) {
    TapeMlp out;
    for (const auto& d : net.layers) {
        Tensor w(d.in, d.out);
        for (int o = 0; o < d.out; ++o)
            for (int i = 0; i < d.in; ++i) w.at(i, o) = d.w[(size_t)o * d.in + i];
        out.W.push_back(trainable ? tp.param(w) : tp.constant(w));
        if (!d.b.empty()) {
            Tensor b(1, d.out);
            b.v = d.b;
            out.b.push_back(trainable ? tp.param(b) : tp.constant(b));
        } else {
            out.b.push_back(-1);
        }
        out.acts.push_back(d.act);
    }
    return out;
}

Var TapeMlp::forward(Tape& tp, Var x) const {
    Var cur = x;
    for (size_t l = 0; l < W.size(); ++l) {
        cur = tp.matmul(cur, W[l]);
        if (b[l] >= 0) cur = tp.add(cur, b[l]);
        switch (acts[l]) {
            case nn::Act::Linear: break;
            case nn::Act::Relu: cur = tp.relu(cur); break;
            case nn::Act::Tanh: cur = tp.tanh_(cur); break;
            case nn::Act::Sigmoid: cur = tp.sigmoid_(cur); break;
        }
    }
    return cur;
}

void TapeMlp::store_to(const Tape& tp, nn::Mlp& net) const {
    for (size_t l = 0; l < W.size(); ++l) {
        auto& d = net.layers[l];
        const Tensor& w = tp.val(W[l]);
        for (int o = 0; o < d.out; ++o)
            for (int i = 0; i < d.in; ++i) d.w[(size_t)o * d.in + i] = w.at(i, o);
        if (b[l] >= 0) d.b = tp.val(b[l]).v;
    }
}

TapeHyperNet TapeHyperNet::from_net(Tape& tp, const dec::HyperNet& net, bool trainable) {
    TapeHyperNet out;
    out.k_h = net.k_h;
    out.L = net.L;
    out.T = net.T;
    out.n = net.n;
    out.N = net.N;
    std::vector<std::pair<int, int>> dims;
    dims.emplace_back(net.k_h, 1);
    for (int i = 1; i < net.L; ++i) dims.emplace_back(net.k_h, net.k_h);
    dims.emplace_back(net.raw_size(), net.k_h);
    for (size_t l = 0; l < net.W.size(); ++l) {
        const auto [rows, cols] = dims[l];
        Tensor w(cols, rows); // transposed for x * W
        for (int o = 0; o < rows; ++o)
            for (int i = 0; i < cols; ++i) w.at(i, o) = net.W[l][(size_t)o * cols + i];
        out.W.push_back(trainable ? tp.param(w) : tp.constant(w));
    }
    return out;
}

Var TapeHyperNet::forward_raw(Tape& tp, int t) const {
    Var x = tp.constant(Tensor::scalar((double)t / (double)T));
    Var cur = x;
    for (size_t l = 0; l < W.size(); ++l) {
        cur = tp.matmul(cur, W[l]);
        if (l + 1 < W.size()) cur = tp.tanh_(cur);
    }
    return cur; // 1 x nN
}

void TapeHyperNet::store_to(const Tape& tp, dec::HyperNet& net) const {
    for (size_t l = 0; l < W.size(); ++l) {
        const Tensor& w = tp.val(W[l]);
        auto& dst = net.W[l];
        const int in = w.rows, out = w.cols;
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) dst[(size_t)o * in + i] = w.at(i, o);
    }
}

// ---- unrolled decoder -----------------------------------------------------------

std::vector<Var> tape_bp_unroll(Tape& tp, Var chan_llr, Var r0_init, int N, int iterations,
                                const WeightProvider& weights) {
    const int n = log2_exact(N);
    const int B = tp.val(chan_llr).rows;
    std::vector<std::vector<int>> up(n), lo(n);
    for (int s = 0; s < n; ++s) {
        const int delta = N >> (s + 1);
        for (int j = 0; j < N; ++j)
            if (!(j & delta)) {
                up[s].push_back(j);
                lo[s].push_back(j + delta);
            }
    }
    Var zero = tp.constant(Tensor(B, N, 0.0));
    std::vector<Var> L((size_t)n + 1, zero), R((size_t)n + 1, zero);
    R[0] = r0_init;
    L[n] = tp.clip_(chan_llr, -kLlrMax, kLlrMax);
    std::vector<Var> outs;
    for (int t = 1; t <= iterations; ++t) {
        for (int s = 0; s < n; ++s) {
            Var ru = tp.gather_cols(R[s], up[s]);
            Var rl = tp.gather_cols(R[s], lo[s]);
            Var lu = tp.gather_cols(L[s + 1], up[s]);
            Var ll = tp.gather_cols(L[s + 1], lo[s]);
            Var gu = tp.minsum(ru, tp.add(ll, rl));
            Var gl = tp.minsum(ru, lu);
            const auto sc = weights(t, s, false);
            if (sc.present) {
                gu = tp.mul(gu, sc.upper);
                gl = tp.mul(gl, sc.lower);
            }
            Var new_u = tp.clip_(gu, -kLlrMax, kLlrMax);
            Var new_l = tp.clip_(tp.add(gl, rl), -kLlrMax, kLlrMax);
            R[s + 1] = tp.interleave_cols(new_u, up[s], new_l, lo[s], N);
        }
        for (int s = n - 1; s >= 0; --s) {
            Var ru = tp.gather_cols(R[s], up[s]);
            Var rl = tp.gather_cols(R[s], lo[s]);
            Var lu = tp.gather_cols(L[s + 1], up[s]);
            Var ll = tp.gather_cols(L[s + 1], lo[s]);
            Var gu = tp.minsum(lu, tp.add(ll, rl));
            Var gl = tp.minsum(ru, lu);
            const auto sc = weights(t, s, true);
            if (sc.present) {
                gu = tp.mul(gu, sc.upper);
                gl = tp.mul(gl, sc.lower);
            }
            Var new_u = tp.clip_(gu, -kLlrMax, kLlrMax);
            Var new_l = tp.clip_(tp.add(gl, ll), -kLlrMax, kLlrMax);
            L[s] = tp.interleave_cols(new_u, up[s], new_l, lo[s], N);
        }
        outs.push_back(tp.add(R[0], L[0]));
    }
    return outs;
}

// ---- shared helpers -------------------------------------------------------------

namespace {

std::vector<int> info_columns(const Mask& mask) {
    std::vector<int> idx;
    for (size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) idx.push_back((int)j);
    return idx;
}

// Masked binary cross entropy per frame: bits and D are B x C; returns B x 1.
Var tape_bce_frames(Tape& tp, const Tensor& bits, Var D, Var mask_weights = -1) {
    Var bc = tp.constant(bits);
    Var bhat = tp.clip_(tp.sigmoid_(tp.neg(D)), kProbEps, 1.0 - kProbEps);
    Var one_minus = tp.add_scalar(tp.neg(bhat), 1.0);
    Var bc1 = tp.add_scalar(tp.neg(bc), 1.0);
    Var ll = tp.add(tp.mul(tp.log_(bhat), bc), tp.mul(tp.log_(one_minus), bc1));
    Var ce = tp.neg(ll);
    if (mask_weights >= 0) ce = tp.mul(ce, mask_weights);
    return tp.row_sum(ce);
}

struct DecoderBatch {
    Tensor llrs; // B x N channel LLRs
    Tensor bits; // B x K info payloads
};

// Classical chain sampler for decoder-local training: fixed construction,
// Gray QAM, AWGN, exact demapping, noise-floor split policy.
DecoderBatch make_decoder_batch(const DecoderTrainConfig& cfg, const Mask& mask,
                                const modem::ConstellationSet& set, std::mt19937_64& rng) {
    const int K = count_info(mask);
    DecoderBatch out;
    out.llrs = Tensor(cfg.batch, cfg.N);
    out.bits = Tensor(cfg.batch, K);
    phy::ChannelSpec chan{phy::ChannelKind::Awgn, cfg.p_n_mw};
    phy::PowerSplit split = cfg.rho < 1.0 ? phy::PowerSplit::from_rho(cfg.rho) : phy::PowerSplit{1e9, 0.0};
    const double rho = split.rho();
    split.sigma_b2 = (1.0 - rho) * cfg.p_n_mw;
    for (int f = 0; f < cfg.batch; ++f) {
        BitVec b(K);
        for (auto& x : b) x = rng() & 1;
        const BitVec c = polar::encode(polar::place_bits(b, mask));
        const auto x = modem::modulate(modem::one_hot_map(c, cfg.M), set);
        const auto ch = phy::channel_apply(x, chan, rng);
        const auto sp = phy::power_split(ch.y, split, rng);
        const auto llr = modem::exact_llr_demap(sp.info, set, cfg.p_n_mw, rho);
        for (int j = 0; j < cfg.N; ++j) out.llrs.at(f, j) = llr[j];
        for (int j = 0; j < K; ++j) out.bits.at(f, j) = b[j];
    }
    return out;
}

Tensor r0_tensor(const Mask& mask, int batch) {
    Tensor r0(batch, (int)mask.size());
    for (int f = 0; f < batch; ++f)
        for (size_t j = 0; j < mask.size(); ++j) r0.at(f, (int)j) = mask[j] ? 0.0 : kLlrMax;
    return r0;
}

std::vector<Tensor> collect_grads(const Tape& tp, const std::vector<Var>& vars,
                                  const ParamStore& store) {
    std::vector<Tensor> grads;
    grads.reserve(vars.size());
    for (size_t i = 0; i < vars.size(); ++i) {
        if (tp.has_grad(vars[i])) {
            grads.push_back(tp.grad(vars[i]));
        } else {
            const auto& t = store.items[i].second;
            grads.emplace_back(t.rows, t.cols);
        }
    }
    return grads;
}

} // namespace

// ---- demapper training ----------------------------------------------------------

void train_demapper(modem::DemapperNet& net, const modem::ConstellationSet& set, double noise_var,
                    double rho, int steps, int batch, double lr, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x44454d41);
    const int bps = set.bits_per_symbol();
    const double srho = std::sqrt(rho);
    const double gamma_linear = set.p_tr / noise_var;
    const double g_std = (10.0 * std::log10(gamma_linear) - net.snr_mean_db) / net.snr_std_db;

    ParamStore store;
    std::vector<nn::Act> acts;
    {
        Tape tp0;
        TapeMlp t0 = TapeMlp::from_mlp(tp0, net.net, true);
        for (size_t l = 0; l < t0.W.size(); ++l) {
            store.add("w" + std::to_string(l), tp0.val(t0.W[l]));
            store.add("b" + std::to_string(l), tp0.val(t0.b[l]));
            acts.push_back(t0.acts[l]);
        }
    }
    Adam opt;
    opt.lr = lr;
    for (int step = 0; step < steps; ++step) {
        Tensor in(batch, 3), bits(batch, bps);
        for (int r = 0; r < batch; ++r) {
            const int m = (int)(rng() % (std::uint64_t)set.M);
            in.at(r, 0) = srho * set.re[m] + gauss(rng, std::sqrt(noise_var / 2.0));
            in.at(r, 1) = srho * set.im[m] + gauss(rng, std::sqrt(noise_var / 2.0));
            in.at(r, 2) = g_std;
            for (int b = 0; b < bps; ++b) bits.at(r, b) = (m >> (bps - 1 - b)) & 1;
        }
        Tape tp;
        std::vector<Var> vars;
        TapeMlp tnet;
        for (size_t l = 0; l < acts.size(); ++l) {
            tnet.W.push_back(tp.param(store.find("w" + std::to_string(l))));
            tnet.b.push_back(tp.param(store.find("b" + std::to_string(l))));
            tnet.acts.push_back(acts[l]);
            vars.push_back(tnet.W.back());
            vars.push_back(tnet.b.back());
        }
        Var raw = tnet.forward(tp, tp.constant(in));
        Var loss = tp.mean_all(tape_bce_frames(tp, bits, raw));
        tp.backward(loss);
        opt.step(store, collect_grads(tp, vars, store));
    }
    Tape tpf;
    TapeMlp tm;
    for (size_t l = 0; l < acts.size(); ++l) {
        tm.W.push_back(tpf.constant(store.find("w" + std::to_string(l))));
        tm.b.push_back(tpf.constant(store.find("b" + std::to_string(l))));
        tm.acts.push_back(acts[l]);
    }
    tm.store_to(tpf, net.net);
}

// ---- decoder-local training --------------------------------------------------------

namespace {

struct HyperTrainer {
    DecoderTrainConfig cfg;
    Mask mask;
    modem::ConstellationSet set;
    dec::HyperNet net;

    void run() {
        auto rng = make_rng(cfg.seed, 0x48595052);
        ParamStore store;
        {
            Tape tp0;
            TapeHyperNet th = TapeHyperNet::from_net(tp0, net, true);
            for (size_t l = 0; l < th.W.size(); ++l)
                store.add("hyper.w" + std::to_string(l), tp0.val(th.W[l]));
        }
        Adam opt;
        opt.lr = cfg.lr;
        const auto info_idx = info_columns(mask);
        for (int step = 0; step < cfg.steps; ++step) {
            const auto batch = make_decoder_batch(cfg, mask, set, rng);
            Tape tp;
            std::vector<Var> vars;
            TapeHyperNet th;
            th.k_h = net.k_h;
            th.L = net.L;
            th.T = net.T;
            th.n = net.n;
            th.N = net.N;
            for (size_t l = 0; l < store.items.size(); ++l) {
                th.W.push_back(tp.param(store.items[l].second));
                vars.push_back(th.W.back());
            }
            Var chan = tp.constant(batch.llrs);
            Var r0 = tp.constant(r0_tensor(mask, cfg.batch));
            // Per-iteration raw outputs, gathered into per-stage tied scales.
            std::vector<Var> raws;
            for (int t = 1; t <= cfg.T; ++t) raws.push_back(th.forward_raw(tp, t));
            auto provider = [&](int t, int s, bool left) {
                std::vector<int> idx;
                const int half = cfg.N / 2;
                idx.reserve(half);
                for (int p = 0; p < half; ++p)
                    idx.push_back(s * cfg.N + 2 * p + (left ? 0 : 1));
                Var row = tp.exp_(tp.gather_cols(raws[t - 1], idx));
                return StageScale{row, row, true};
            };
            const auto outs = tape_bp_unroll(tp, chan, r0, cfg.N, cfg.T, provider);
            Var loss = -1;
            if (cfg.multiloss) {
                for (Var D : outs) {
                    Var ce = tp.mean_all(tape_bce_frames(tp, batch.bits, tp.gather_cols(D, info_idx)));
                    loss = loss < 0 ? ce : tp.add(loss, ce);
                }
                loss = tp.scale(loss, 1.0 / (double)outs.size());
            } else {
                loss = tp.mean_all(tape_bce_frames(tp, batch.bits, tp.gather_cols(outs.back(), info_idx)));
            }
            tp.backward(loss);
            opt.step(store, collect_grads(tp, vars, store));
        }
        Tape tpf;
        TapeHyperNet th;
        th.k_h = net.k_h;
        th.L = net.L;
        th.T = net.T;
        th.n = net.n;
        th.N = net.N;
        for (auto& [name, t] : store.items) th.W.push_back(tpf.constant(t));
        th.store_to(tpf, net);
    }
};

} // namespace

dec::HyperNet train_hyper_decoder(const DecoderTrainConfig& cfg) {
    HyperTrainer tr;
    tr.cfg = cfg;
    tr.mask = polar::construct_ga(cfg.N, cfg.K, cfg.design_snr_db);
    tr.set = modem::qam_constellation(cfg.M, cfg.p_tr_mw);
    tr.net = dec::HyperNet::make(cfg.N, cfg.k_h, cfg.hyper_layers, cfg.T, cfg.seed);
    // Start near plain min-sum: small logits, weights near one.
    for (auto& w : tr.net.W)
        for (auto& x : w) x *= 0.1;
    tr.run();
    return tr.net;
}

dec::IterWeights train_flat_decoder(const DecoderTrainConfig& cfg) {
    const Mask mask = polar::construct_ga(cfg.N, cfg.K, cfg.design_snr_db);
    const auto set = modem::qam_constellation(cfg.M, cfg.p_tr_mw);
    const int n = log2_exact(cfg.N);
    auto rng = make_rng(cfg.seed, 0x464c4154);
    ParamStore store;
    for (int t = 0; t < cfg.T; ++t) {
        store.add("flat.alpha" + std::to_string(t), Tensor(n, cfg.N, 0.0));
        store.add("flat.beta" + std::to_string(t), Tensor(n, cfg.N, 0.0));
    }
    Adam opt;
    opt.lr = cfg.lr;
    const auto info_idx = info_columns(mask);
    for (int step = 0; step < cfg.steps; ++step) {
        const auto batch = make_decoder_batch(cfg, mask, set, rng);
        Tape tp;
        std::vector<Var> vars;
        for (auto& [name, t] : store.items) vars.push_back(tp.param(t));
        Var chan = tp.constant(batch.llrs);
        Var r0 = tp.constant(r0_tensor(mask, cfg.batch));
        std::vector<std::vector<int>> up(n), lo(n);
        for (int s = 0; s < n; ++s) {
            const int delta = cfg.N >> (s + 1);
            for (int j = 0; j < cfg.N; ++j)
                if (!(j & delta)) {
                    up[s].push_back(j);
                    lo[s].push_back(j + delta);
                }
        }
        auto provider = [&](int t, int s, bool left) {
            Var lattice = vars[2 * (t - 1) + (left ? 0 : 1)];
            Var row = tp.gather_rows(lattice, {s}); // 1 x N of raw logits
            Var u = tp.exp_(tp.gather_cols(row, up[s]));
            Var l = tp.exp_(tp.gather_cols(row, lo[s]));
            return StageScale{u, l, true};
        };
        const auto outs = tape_bp_unroll(tp, chan, r0, cfg.N, cfg.T, provider);
        Var loss = tp.mean_all(tape_bce_frames(tp, batch.bits, tp.gather_cols(outs.back(), info_idx)));
        tp.backward(loss);
        opt.step(store, collect_grads(tp, vars, store));
    }
    dec::IterWeights out;
    for (int t = 0; t < cfg.T; ++t) {
        dec::BpWeights w;
        w.n = n;
        w.N = cfg.N;
        const auto& araw = store.find("flat.alpha" + std::to_string(t)).v;
        const auto& braw = store.find("flat.beta" + std::to_string(t)).v;
        w.alpha.resize(araw.size());
        w.beta.resize(braw.size());
        for (size_t i = 0; i < araw.size(); ++i) w.alpha[i] = std::exp(araw[i]);
        for (size_t i = 0; i < braw.size(); ++i) w.beta[i] = std::exp(braw[i]);
        out.per_iter.push_back(std::move(w));
    }
    return out;
}

// ---- end-to-end training -------------------------------------------------------------

E2eResult train_end_to_end(const E2eConfig& cfg, const phy::EhNet& eh) {
    const int N = cfg.N, M = cfg.M, B = cfg.batch;
    const int bps = log2_exact(M);
    const int S = N / bps;
    const double gamma_db = phy::mw_to_dbm(cfg.p_tr_mw) - phy::mw_to_dbm(cfg.p_n_mw);

    E2eResult res;
    res.mapper = modem::MapperNet::make(M, cfg.p_tr_mw, 64, 3, cfg.seed * 7 + 1);
    res.demapper = modem::DemapperNet::make(M, 64, 3, cfg.seed * 7 + 2);
    res.hyper = dec::HyperNet::make(N, cfg.k_h, cfg.hyper_layers, cfg.T_train, cfg.seed * 7 + 3);
    for (auto& w : res.hyper.W)
        for (auto& x : w) x *= 0.1;
    res.f_soft.assign(N, 0.0);
    res.rho_logit = 0.0;

    ParamStore store;
    store.add("f_soft", Tensor::row(res.f_soft));
    store.add("rho_logit", Tensor::scalar(res.rho_logit));
    {
        Tape tp0;
        TapeMlp tm = TapeMlp::from_mlp(tp0, res.mapper.net, true);
        for (size_t l = 0; l < tm.W.size(); ++l) {
            store.add("mapper.w" + std::to_string(l), tp0.val(tm.W[l]));
            store.add("mapper.b" + std::to_string(l), tp0.val(tm.b[l]));
        }
        TapeMlp td = TapeMlp::from_mlp(tp0, res.demapper.net, true);
        for (size_t l = 0; l < td.W.size(); ++l) {
            store.add("demapper.w" + std::to_string(l), tp0.val(td.W[l]));
            store.add("demapper.b" + std::to_string(l), tp0.val(td.b[l]));
        }
        TapeHyperNet th = TapeHyperNet::from_net(tp0, res.hyper, true);
        for (size_t l = 0; l < th.W.size(); ++l)
            store.add("hyper.w" + std::to_string(l), tp0.val(th.W[l]));
    }

    Adam adam;
    adam.lr = cfg.lr;
    Sgd sgd;
    sgd.lr = cfg.lr;
    auto rng = make_rng(cfg.seed, 0x453245);
    const double g_std = (gamma_db - res.mapper.snr_mean_db) / res.mapper.snr_std_db;
    const int mapper_layers = (int)res.mapper.net.layers.size();
    const int demapper_layers = (int)res.demapper.net.layers.size();

    std::vector<std::pair<std::string, Tensor>> snapshot = store.items;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_decay) {
            double f = 1.0;
            if (epoch >= cfg.epochs * 3 / 4) f = 0.25;
            else if (epoch >= cfg.epochs / 2) f = 0.5;
            adam.lr = cfg.lr * f;
            sgd.lr = cfg.lr * f;
        }
        double ep_loss = 0.0, ep_pout = 0.0;
        std::uint64_t bit_errs = 0, bits_total = 0;
        bool bad = false;
        for (int bi = 0; bi < cfg.batches_per_epoch && !bad; ++bi) {
            // ---- frame constants for this batch
            Tensor b_full(B, N), p_u(B, N);
            for (int i = 0; i < b_full.size(); ++i) b_full.v[i] = (double)(rng() & 1);
            for (int i = 0; i < p_u.size(); ++i) p_u.v[i] = uniform01(rng);
            Tensor eps0(B * S, 2), epsb(B * S, 2), hr(B * S, 1, 1.0), hi(B * S, 1, 0.0);
            for (int i = 0; i < eps0.size(); ++i) eps0.v[i] = gauss(rng, 1.0);
            for (int i = 0; i < epsb.size(); ++i) epsb.v[i] = gauss(rng, 1.0);
            if (cfg.channel == phy::ChannelKind::Rayleigh)
                for (int i = 0; i < B * S; ++i) {
                    hr.v[i] = gauss(rng, std::sqrt(0.5));
                    hi.v[i] = gauss(rng, std::sqrt(0.5));
                }

            Tape tp;
            std::vector<Var> vars;
            for (auto& [name, t] : store.items) vars.push_back(tp.param(t));
            int vi = 0;
            Var f_soft = vars[vi++];
            Var rho_logit = vars[vi++];
            TapeMlp mapper;
            for (int l = 0; l < mapper_layers; ++l) {
                mapper.W.push_back(vars[vi++]);
                mapper.b.push_back(vars[vi++]);
                mapper.acts.push_back(res.mapper.net.layers[l].act);
            }
            TapeMlp demap;
            for (int l = 0; l < demapper_layers; ++l) {
                demap.W.push_back(vars[vi++]);
                demap.b.push_back(vars[vi++]);
                demap.acts.push_back(res.demapper.net.layers[l].act);
            }
            TapeHyperNet hyper;
            hyper.k_h = res.hyper.k_h;
            hyper.L = res.hyper.L;
            hyper.T = res.hyper.T;
            hyper.n = res.hyper.n;
            hyper.N = res.hyper.N;
            while (vi < (int)vars.size()) hyper.W.push_back(vars[vi++]);

            // ---- selection
            Var f_pro = tp.sigmoid_(f_soft);
            Var f_pro_b = tp.add(tp.constant(Tensor(B, N, 0.0)), f_pro);
            Var f_hard = tp.st_binarize(f_pro_b, tp.constant(p_u));
            const Tensor& fh = tp.val(f_hard);

            // ---- numeric encode of the masked payload
            std::vector<int> sym_idx((size_t)B * S);
            for (int f = 0; f < B; ++f) {
                BitVec u(N);
                for (int j = 0; j < N; ++j) u[j] = (std::uint8_t)(fh.at(f, j) * b_full.at(f, j));
                const BitVec c = polar::encode(u);
                for (int s = 0; s < S; ++s) {
                    int idx = 0;
                    for (int b = 0; b < bps; ++b) idx = (idx << 1) | c[s * bps + b];
                    sym_idx[(size_t)f * S + s] = idx;
                }
            }

            // ---- mapper: constellation with exact power normalization
            Var gin = tp.constant(Tensor::scalar(g_std));
            Var raw_pts = mapper.forward(tp, gin);          // 1 x 2M
            Var pts = tp.reshape(raw_pts, M, 2);            // M x 2
            Var meanp = tp.scale(tp.sum_all(tp.mul(pts, pts)), 1.0 / M);
            Var norm = tp.sqrt_(tp.div(tp.constant(Tensor::scalar(cfg.p_tr_mw)), meanp));
            Var ptsn = tp.mul(pts, norm);
            Var x = tp.gather_rows(ptsn, sym_idx); // (B*S) x 2

            // ---- channel
            Var y = x;
            if (cfg.channel == phy::ChannelKind::Rayleigh) {
                Var xr = tp.gather_cols(x, {0});
                Var xi = tp.gather_cols(x, {1});
                Var hrc = tp.constant(hr), hic = tp.constant(hi);
                Var yr = tp.sub(tp.mul(xr, hrc), tp.mul(xi, hic));
                Var yi = tp.add(tp.mul(xr, hic), tp.mul(xi, hrc));
                y = tp.concat_cols({yr, yi});
            }
            Tensor n0 = eps0;
            for (auto& v : n0.v) v *= std::sqrt(cfg.p_n_mw / 2.0);
            y = tp.add(y, tp.constant(n0));

            // ---- split
            Var rho = tp.sigmoid_(rho_logit);
            Var srho = tp.sqrt_(rho);
            Var one_minus_rho = tp.add_scalar(tp.neg(rho), 1.0);
            Var info = tp.mul(y, srho);
            if (cfg.noise_floor_policy) {
                Var nb_std = tp.sqrt_(tp.scale(one_minus_rho, cfg.p_n_mw / 2.0));
                info = tp.add(info, tp.mul(tp.constant(epsb), nb_std));
            } else if (cfg.sigma_b2_fixed > 0.0) {
                Tensor nb = epsb;
                for (auto& v : nb.v) v *= std::sqrt(cfg.sigma_b2_fixed / 2.0);
                info = tp.add(info, tp.constant(nb));
            }

            // ---- energy branch (frozen surrogate)
            Var sympow = tp.row_sum(tp.mul(y, y));            // (B*S) x 1
            Var s_mean = tp.row_mean(tp.reshape(sympow, B, S)); // B x 1
            Var p_in = tp.mul(s_mean, one_minus_rho);
            Var p_norm = tp.scale(tp.clip_(p_in, eh.fit_min, eh.fit_max), 1.0 / eh.in_scale);
            TapeMlp eh_tape = TapeMlp::from_mlp(tp, eh.net, /*trainable=*/false);
            Var p_out = tp.scale(eh_tape.forward(tp, p_norm), eh.out_scale); // B x 1

            // ---- demapper + decoder
            Var deq = info;
            if (cfg.channel == phy::ChannelKind::Rayleigh) {
                // genie CSI equalization of the information branch
                Tensor wr(B * S, 1), wi(B * S, 1);
                for (int i = 0; i < B * S; ++i) {
                    const double n2 = std::max(hr.v[i] * hr.v[i] + hi.v[i] * hi.v[i], 1e-12);
                    wr.v[i] = hr.v[i] / n2;
                    wi.v[i] = -hi.v[i] / n2;
                }
                Var ir = tp.gather_cols(info, {0});
                Var ii = tp.gather_cols(info, {1});
                Var wrc = tp.constant(wr), wic = tp.constant(wi);
                Var zr = tp.sub(tp.mul(ir, wrc), tp.mul(ii, wic));
                Var zi = tp.add(tp.mul(ir, wic), tp.mul(ii, wrc));
                deq = tp.concat_cols({zr, zi});
            }
            Var din = tp.concat_cols({deq, tp.constant(Tensor(B * S, 1, g_std))});
            Var chan_llr = tp.reshape(demap.forward(tp, din), B, N);
            Var r0 = tp.scale(tp.add_scalar(tp.neg(f_hard), 1.0), kLlrMax);
            std::vector<Var> raws;
            for (int t = 1; t <= cfg.T_train; ++t) raws.push_back(hyper.forward_raw(tp, t));
            auto provider = [&](int t, int s, bool left) {
                std::vector<int> idx;
                idx.reserve(N / 2);
                for (int p = 0; p < N / 2; ++p) idx.push_back(s * N + 2 * p + (left ? 0 : 1));
                Var row = tp.exp_(tp.gather_cols(raws[t - 1], idx));
                return StageScale{row, row, true};
            };
            const auto outs = tape_bp_unroll(tp, chan_llr, r0, N, cfg.T_train, provider);
            Var D = outs.back();

            // ---- composite objective
            Var ce_frame = tape_bce_frames(tp, b_full, D, f_hard);
            Var pf = tp.clip_(p_out, kPowerFloor, 1e12);
            Var lam = tp.constant(Tensor(B, 1, cfg.weights.lambda));
            Var part1 = tp.div(lam, pf);
            Var diff = tp.add_scalar(tp.neg(pf), cfg.weights.p_targ_mw);
            Var per_frame =
                tp.add(ce_frame,
                       tp.add(tp.scale(part1, cfg.weights.beta1),
                              tp.add(tp.scale(diff, cfg.weights.beta2),
                                     tp.scale(tp.mul(diff, diff), cfg.weights.beta3))));
            Var rate_pen = tp.scale(tape_loss_rate(tp, f_soft, cfg.weights), cfg.weights.beta4);
            Var loss = tp.add(tp.mean_all(per_frame), rate_pen);

            const double loss_val = tp.val(loss).v[0];
            if (!std::isfinite(loss_val)) {
                bad = true;
                break;
            }
            tp.backward(loss);
            auto grads = collect_grads(tp, vars, store);
            if (cfg.use_sgd) sgd.step(store, grads);
            else adam.step(store, grads);

            // epoch stats from this batch's forward values
            ep_loss += loss_val;
            const Tensor& Dv = tp.val(D);
            for (int f = 0; f < B; ++f)
                for (int j = 0; j < N; ++j)
                    if (fh.at(f, j) != 0.0) {
                        ++bits_total;
                        const int hard = Dv.at(f, j) < 0.0 ? 1 : 0;
                        if (hard != (int)b_full.at(f, j)) ++bit_errs;
                    }
            const Tensor& pv = tp.val(p_out);
            double pm = 0.0;
            for (double v : pv.v) pm += v;
            ep_pout += pm / B;
        }
        if (bad) {
            store.items = snapshot; // keep the last good parameters
            res.diverged = true;
            break;
        }
        snapshot = store.items;
        HistoryRow row;
        row.epoch = epoch;
        row.loss = ep_loss / cfg.batches_per_epoch;
        row.ber = bits_total ? (double)bit_errs / (double)bits_total : 0.0;
        row.p_out_mw = ep_pout / cfg.batches_per_epoch;
        row.rate = polar::rate_of(store.find("f_soft").v);
        res.history.push_back(row);
    }

    // Copy trained values back into the inference containers.
    res.f_soft = store.find("f_soft").v;
    res.rho_logit = store.find("rho_logit").v[0];
    {
        Tape tpf;
        TapeMlp tm;
        for (int l = 0; l < mapper_layers; ++l) {
            tm.W.push_back(tpf.constant(store.find("mapper.w" + std::to_string(l))));
            tm.b.push_back(tpf.constant(store.find("mapper.b" + std::to_string(l))));
            tm.acts.push_back(res.mapper.net.layers[l].act);
        }
        tm.store_to(tpf, res.mapper.net);
        TapeMlp td;
        for (int l = 0; l < demapper_layers; ++l) {
            td.W.push_back(tpf.constant(store.find("demapper.w" + std::to_string(l))));
            td.b.push_back(tpf.constant(store.find("demapper.b" + std::to_string(l))));
            td.acts.push_back(res.demapper.net.layers[l].act);
        }
        td.store_to(tpf, res.demapper.net);
        TapeHyperNet th;
        th.k_h = res.hyper.k_h;
        th.L = res.hyper.L;
        th.T = res.hyper.T;
        th.n = res.hyper.n;
        th.N = res.hyper.N;
        for (size_t l = 0; l < res.hyper.W.size(); ++l)
            th.W.push_back(tpf.constant(store.find("hyper.w" + std::to_string(l))));
        th.store_to(tpf, res.hyper);
    }
    return res;
}

} // namespace iden::learn
