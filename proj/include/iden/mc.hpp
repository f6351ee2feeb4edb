#pragma once

#include "iden/decode.hpp"
#include "iden/modem.hpp"
#include "iden/phy.hpp"
#include "iden/polar.hpp"

#include <memory>
#include <optional>
#include <string>

namespace iden::mc {

enum class DecoderKind { Sc, Scl, Bp, FlatBp, HyperBp };
enum class MapperKind { Qam, Ae };
enum class ConstructionKind { Ga, Pw, Nr5g, Learned };

struct SimConfig {
    // code
    int n = 64;
    int k = 32;
    ConstructionKind construction = ConstructionKind::Ga;
    double design_snr_db = 2.0;
    std::vector<double> f_soft; // Learned construction: top-K of these logits
    // modulation
    int mod_order = 4;
    MapperKind mapper = MapperKind::Qam;
    std::string mapper_checkpoint;
    std::string demapper_checkpoint; // optional neural demapper
    // decoder
    DecoderKind decoder = DecoderKind::Bp;
    int iterations = 50;
    int list_size = 2;
    bool exact_f = false;
    std::string decoder_checkpoint; // hyper / flat weights
    // channel & power
    phy::ChannelKind channel = phy::ChannelKind::Awgn;
    double p_n_dbm = -3.0;
    double p_tr_dbm = 3.0;
    double rho = 0.7;
    // Conversion noise: "auto" keeps the information-branch noise floor at
    // P_n (sigma_b^2 = (1 - rho) P_n), matching the rho-shifted SNR model.
    bool sigma_b2_auto = true;
    double sigma_b2_mw = 0.0;
    // energy
    phy::EhParams eh_params;
    std::string eh_checkpoint; // fitted surrogate; reference curve if empty
    double p_targ_mw = 0.05;
    // stopping
    std::uint64_t max_frames = 200000;
    std::uint64_t target_block_errors = 100;
    std::uint64_t chunk = 2048;
    std::uint64_t seed = 1;

    void validate() const;
    double p_n_mw() const { return phy::dbm_to_mw(p_n_dbm); }
    double p_tr_mw() const { return phy::dbm_to_mw(p_tr_dbm); }
    double sigma_b2_effective() const {
        return sigma_b2_auto ? (1.0 - rho) * p_n_mw() : sigma_b2_mw;
    }
};

SimConfig load_config(const std::string& path);

struct TrialResult {
    std::uint64_t frames = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t block_errors = 0;
    double ber = 0.0;
    double bler = 0.0;
    double mean_p_out_mw = 0.0;
    double mean_rho = 0.0;
    double wall_seconds = 0.0;
};

// Pre-built runtime objects for a config (mask, constellation, nets).
struct Chain;
std::shared_ptr<Chain> build_chain(const SimConfig& cfg);

// Frame-parallel Monte Carlo: every frame owns an RNG stream keyed by
// (seed, frame index), so worker count never changes the result. Stops at
// min(max_frames, >= target_block_errors) evaluated on chunk boundaries.
TrialResult run_monte_carlo(const SimConfig& cfg, int workers = 1);
TrialResult run_monte_carlo(const SimConfig& cfg, const Chain& chain, int workers);

// Complexity counters (closed form). Conventions match the instrumented
// dec::OpCounters: additions are the additive message combinations, one per
// update; weighted decoders add one scaling multiplication per update; the
// hypernetwork adds its MAC multiplies; memory counts materialized weight
// and staging slots per decode call.
dec::OpCounters count_ops(DecoderKind kind, int n_bits, int iterations, int k_h = 8, int L = 3);

// ---- energy sweep ------------------------------------------------------------

struct SweepPoint {
    double p_targ_mw = 0.0;
    bool feasible = true;
    double rho = 0.0;
    double p_out_mw = 0.0;
    double ber = 0.0;
    double bler = 0.0;
};

// For each target: solve the splitting factor so the measured mean harvested
// power hits the target (bisection on a calibration sub-run), then measure
// BER at that operating point. Unreachable targets are marked infeasible.
std::vector<SweepPoint> sweep_energy(const SimConfig& cfg, const std::vector<double>& targets,
                                     int workers = 1);

// ---- adaptability ---------------------------------------------------------------

struct AdaptCell {
    std::string decoder;
    int t_test = 0;
    double ber = 0.0;
    double bler = 0.0;
};

// BER grid over {plain BP, trained per-iteration weights, hypernet} x T_test,
// on paired noise (same seed for every cell).
std::vector<AdaptCell> adaptability_matrix(const SimConfig& cfg, const dec::HyperNet& hyper,
                                           const dec::IterWeights& flat,
                                           const std::vector<int>& t_tests, int workers = 1);

// ---- bounds ---------------------------------------------------------------------

using Curve = std::vector<std::pair<double, double>>; // (SNR dB, BLER)

// Translate an externally supplied finite-blocklength bound curve by
// 10 log10(rho) dB (the split-factor SNR shift).
Curve shift_bound(const Curve& curve, double rho);

// Gaussian-channel normal approximation over a dB grid: a proxy curve for
// harness plumbing, not the meta-converse bound.
Curve normal_approx_curve(int n_symbols, int k_bits, double snr_db_min, double snr_db_max,
                          double step_db);

// ---- CSV ------------------------------------------------------------------------

std::string trial_csv(const SimConfig& cfg, const TrialResult& r);
std::string sweep_csv(const std::vector<SweepPoint>& pts);
std::string adapt_csv(const std::vector<AdaptCell>& cells);
std::string curve_csv(const Curve& c);

Curve load_curve_csv(const std::string& path);

} // namespace iden::mc
