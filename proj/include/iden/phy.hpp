#pragma once

#include "iden/common.hpp"
#include "iden/mlp.hpp"
#include "iden/rng.hpp"

#include <complex>

namespace iden::phy {

using cplx = std::complex<double>;

enum class ChannelKind { Awgn, Rayleigh };

struct ChannelSpec {
    ChannelKind kind = ChannelKind::Awgn;
    double noise_power_mw = 1.0; // P_n; 0 only in noiseless test mode
};

struct ChannelOut {
    std::vector<cplx> y;
    std::vector<cplx> h; // per-symbol coefficients (all ones for AWGN)
};

// y = h .* x + n0, n0 ~ CN(0, P_n) per symbol; Rayleigh draws h ~ CN(0, 1).
ChannelOut channel_apply(const std::vector<cplx>& x, const ChannelSpec& spec, std::mt19937_64& rng);

// Receiver-side power split. rho = sigmoid(rho_logit) clamped to the open
// interval, so the 0 <= rho <= 1 constraint holds structurally.
struct PowerSplit {
    double rho_logit = 0.0;
    double sigma_b2 = 0.0; // conversion-noise variance on the information branch

    double rho() const { return clip(sigmoid(rho_logit), 1e-9, 1.0 - 1e-9); }
    static PowerSplit from_rho(double rho_value);
};

struct SplitOut {
    std::vector<cplx> info;        // sqrt(rho) y + n_b
    double p_in_mw = 0.0;          // (1 - rho) * mean |y|^2, energy branch
    double p_info_mw = 0.0;        // rho * mean |y|^2, information branch
    double received_power_mw = 0.0; // mean |y|^2; p_in + p_info == this, bit-exact
};

SplitOut power_split(const std::vector<cplx>& y, const PowerSplit& split, std::mt19937_64& rng);

// Reference harvester nonlinearity: normalized logistic saturation,
// P_out = p_sat (sig(a (p - b)) - sig(-a b)) / (1 - sig(-a b)).
// Zero at zero input, monotone, saturates at p_sat.
struct EhParams {
    double p_sat_mw = 0.1;
    double a_per_mw = 1.5;
    double b_mw = 1.0;
};

double eh_reference(double p_in_mw, const EhParams& params = {});

// Fitted surrogate: tanh dense net (tanh output layer as well) on scaled
// input/output; forward clamps the input to the fitted range.
struct EhNet {
    nn::Mlp net;
    double in_scale = 10.0;  // p_in divided by this before the net
    double out_scale = 0.1;  // net output multiplied by this
    double fit_min = 0.0;
    double fit_max = 10.0;

    double forward(double p_in_mw) const;
};

struct EhFitReport {
    double max_abs_err = 0.0;
    double rms_err = 0.0;
    int epochs = 0;
};

// Least-squares regression of the surrogate onto (p_in, p_out) samples.
// Deterministic for a fixed seed. Throws FitError with the residual report
// if the fit tolerance is not met. After fitting the parameters are frozen;
// end-to-end training never updates them.
EhNet eh_fit(const std::vector<std::pair<double, double>>& samples, double tolerance_mw,
             std::uint64_t seed, int hidden = 16, int hidden_layers = 3,
             EhFitReport* report = nullptr);

// dBm <-> mW. mw_to_dbm(0) is a guard error (would be -inf).
double dbm_to_mw(double p_dbm);
double mw_to_dbm(double p_mw);

} // namespace iden::phy
