#pragma once

#include "iden/decode.hpp"
#include "iden/modem.hpp"
#include "iden/phy.hpp"
#include "iden/polar.hpp"
#include "iden/tape.hpp"

#include <functional>

namespace iden::learn {

// ---- losses -----------------------------------------------------------------

struct LossWeights {
    double lambda = 0.0005;  // trade-off bias; defaults to 0.01 * p_targ below
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0, beta4 = 1.0;
    double p_targ_mw = 0.05;
    double r_targ = 0.5;
    int batch = 256;

    static LossWeights defaults(double p_targ, double r_targ_value);
};

// Log-likelihood form: sum_i b log b_hat + (1-b) log(1-b_hat); b_hat is the
// predicted probability of bit 1, clipped to [1e-7, 1 - 1e-7]. The training
// objective enters this with a leading minus (binary cross entropy).
double loss_wit(const std::vector<double>& b, const std::vector<double>& b_hat);

// lambda / p_out + (p_targ - p_out) + (p_targ - p_out)^2. May be negative when
// the harvested power exceeds the target. p_out must be positive; values below
// the 1e-6 mW floor are raised to it.
double loss_wet(double p_out_mw, const LossWeights& w);

// (mean sigmoid(f_soft) - r_targ)^2.
double loss_rate(const std::vector<double>& f_soft, const LossWeights& w);

// Composite objective actually minimized: the per-frame sum of binary cross
// entropy (the minus sign of the objective distributed onto the WIT
// log-likelihood), the weighted harvested-power penalties and the rate
// penalty, averaged over the batch.
double loss_total(const std::vector<double>& wit_ll_per_frame,
                  const std::vector<double>& p_out_per_frame, const std::vector<double>& f_soft,
                  const LossWeights& w);

// Tape builders for the same terms (gradient-checked against central
// differences).
ad::Var tape_loss_wit(ad::Tape& tp, const std::vector<double>& b, ad::Var b_hat);
ad::Var tape_loss_wet(ad::Tape& tp, ad::Var p_out, const LossWeights& w); // per-frame, B x 1
ad::Var tape_loss_rate(ad::Tape& tp, ad::Var f_soft, const LossWeights& w);
ad::Var tape_loss_total(ad::Tape& tp, const ad::Tensor& bits, ad::Var b_hat, ad::Var p_out,
                        ad::Var f_soft, const LossWeights& w);

// ---- parameters and optimizers ----------------------------------------------

struct ParamStore {
    std::vector<std::pair<std::string, ad::Tensor>> items;

    ad::Tensor& add(const std::string& name, ad::Tensor t);
    ad::Tensor& find(const std::string& name);
    const ad::Tensor& find(const std::string& name) const;
    bool has(const std::string& name) const;
};

struct Sgd {
    double lr = 0.005;
    void step(ParamStore& params, const std::vector<ad::Tensor>& grads);
};

struct Adam {
    double lr = 0.005;
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t = 0;
    std::vector<std::vector<double>> m, v;

    void step(ParamStore& params, const std::vector<ad::Tensor>& grads);
};

// ---- tape helpers -------------------------------------------------------------

// Dense net mirrored onto a tape. Weights are stored transposed (in x out) so
// the forward pass is x * W + b on row batches.
struct TapeMlp {
    std::vector<ad::Var> W, b;
    std::vector<nn::Act> acts;

    static TapeMlp from_mlp(ad::Tape& tp, const nn::Mlp& net, bool trainable);
    ad::Var forward(ad::Tape& tp, ad::Var x) const;
    // Copy trained tape values back into the inference container.
    void store_to(const ad::Tape& tp, nn::Mlp& net) const;
};

// Per-iteration weight rows for one BP stage (1 x N/2 each, upper/lower PE
// outputs). Plain min-sum when absent.
struct StageScale {
    ad::Var upper = -1, lower = -1;
    bool present = false;
};
using WeightProvider = std::function<StageScale(int t, int stage, bool left_pass)>;

// Unrolled scaled min-sum decoder on the tape: same schedule as
// dec::bp_decode. Returns the decision LLRs R0 + L0 (B x N) after each
// iteration.
std::vector<ad::Var> tape_bp_unroll(ad::Tape& tp, ad::Var chan_llr, ad::Var r0_init, int N,
                                    int iterations, const WeightProvider& weights);

// Hypernet mirrored onto the tape; raw output (1 x nN) for iteration t.
struct TapeHyperNet {
    std::vector<ad::Var> W;
    int k_h = 0, L = 0, T = 0, n = 0, N = 0;

    static TapeHyperNet from_net(ad::Tape& tp, const dec::HyperNet& net, bool trainable);
    ad::Var forward_raw(ad::Tape& tp, int t) const;
    void store_to(const ad::Tape& tp, dec::HyperNet& net) const;
};

// ---- training entry points ----------------------------------------------------

struct HistoryRow {
    int epoch = 0;
    double loss = 0.0;
    double ber = 0.0;
    double p_out_mw = 0.0;
    double rate = 0.0;
};

// Supervised demapper fit: random symbols of the given constellation through
// AWGN at the given noise variance, BCE on the labeling bits.
void train_demapper(modem::DemapperNet& net, const modem::ConstellationSet& set, double noise_var,
                    double rho, int steps, int batch, double lr, std::uint64_t seed);

struct DecoderTrainConfig {
    int N = 64, K = 32, M = 4;
    double p_tr_mw = phy::dbm_to_mw(3.0);
    double p_n_mw = phy::dbm_to_mw(-3.0);
    double design_snr_db = 2.0;
    double rho = 1.0; // fixed split during decoder-local training
    int T = 6;
    int k_h = 8, hyper_layers = 3;
    int steps = 300;
    int batch = 64;
    double lr = 0.005;
    std::uint64_t seed = 1;
    bool multiloss = true; // per-iteration supervision (hyper decoder)
};

// Train the iteration-indexed weight generator on the classical chain
// (construction + QAM + exact demapper). Per-iteration supervision makes the
// generated weights good at every t <= T.
dec::HyperNet train_hyper_decoder(const DecoderTrainConfig& cfg);

// Train free per-iteration weights with supervision on the final iteration
// only (the non-recurrent baseline decoder).
dec::IterWeights train_flat_decoder(const DecoderTrainConfig& cfg);

struct E2eConfig {
    int N = 64, K = 32, M = 4;
    phy::ChannelKind channel = phy::ChannelKind::Awgn;
    double p_tr_mw = phy::dbm_to_mw(3.0);
    double p_n_mw = phy::dbm_to_mw(-3.0);
    double p_targ_mw = 0.05;
    LossWeights weights = LossWeights::defaults(0.05, 0.5);
    int T_train = 6;
    int k_h = 8, hyper_layers = 3;
    int epochs = 500;
    int batches_per_epoch = 1;
    int batch = 256;
    double lr = 0.005;
    // step decay: lr/2 after 50% of the epochs, lr/4 after 75%
    bool lr_decay = true;
    std::uint64_t seed = 1;
    // Information-branch conversion noise: when true, sigma_b^2 = (1-rho) P_n
    // so the branch noise floor stays at P_n and the effective SNR is
    // rho P_tr / P_n; otherwise the fixed variance below is used.
    bool noise_floor_policy = true;
    double sigma_b2_fixed = 0.0;
    bool use_sgd = false; // Adam by default
};

struct E2eResult {
    modem::MapperNet mapper;
    modem::DemapperNet demapper;
    dec::HyperNet hyper;
    std::vector<double> f_soft;
    double rho_logit = 0.0;
    std::vector<HistoryRow> history;
    bool diverged = false;
};

// Joint optimization of {mapper, demapper, hypernet, selection logits, split
// logit} against the composite loss; the harvester surrogate is frozen. Per
// batch: draw payloads and selection thresholds, binarize, encode, map,
// transmit, split, harvest, demap, decode, step.
E2eResult train_end_to_end(const E2eConfig& cfg, const phy::EhNet& eh);

} // namespace iden::learn
