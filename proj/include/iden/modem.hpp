#pragma once

#include "iden/common.hpp"
#include "iden/mlp.hpp"

#include <complex>

namespace iden::modem {

using cplx = std::complex<double>;

// M constellation points with mean symbol power p_tr (mW). Row index equals
// the big-endian value of the log2(M) labeling bits.
struct ConstellationSet {
    int M = 0;
    double p_tr = 1.0;
    std::vector<double> re, im;

    cplx point(int m) const { return {re[m], im[m]}; }
    double mean_power() const;
    int bits_per_symbol() const { return log2_exact(M); }
};

// Gray-mapped square QAM normalized to mean symbol power p_tr. M in {4,16,64}.
ConstellationSet qam_constellation(int M, double p_tr);

// One symbol index per group of log2(M) bits, first bit most significant.
struct OneHotBlock {
    int M = 0;
    std::vector<int> indices;

    // Dense M x S view, one 1 per column.
    std::vector<std::uint8_t> dense() const;
};

OneHotBlock one_hot_map(const BitVec& bits, int M);

// Row selection: symbol s is the constellation point of column s's index.
std::vector<cplx> modulate(const OneHotBlock& v, const ConstellationSet& set);

// Trainable constellation generator: SNR (dB, standardized by the stored
// affine constants) -> dense net (ReLU hiddens, linear out) -> M x 2 points,
// then scaled so the mean symbol power equals p_tr exactly.
struct MapperNet {
    nn::Mlp net;
    int M = 0;
    double p_tr = 1.0;
    double snr_mean_db = 5.0;
    double snr_std_db = 10.0;

    static MapperNet make(int M, double p_tr, int hidden = 64, int hidden_layers = 3,
                          std::uint64_t seed = 1);
    ConstellationSet forward(double gamma_linear) const;
};

// Trainable soft demapper: per received symbol, (Re y, Im y, standardized SNR
// dB) -> log2(M) raw outputs read directly as LLRs log p(0)/p(1), concatenated
// in one_hot_map bit order.
struct DemapperNet {
    nn::Mlp net;
    int M = 0;
    double snr_mean_db = 5.0;
    double snr_std_db = 10.0;

    static DemapperNet make(int M, int hidden = 64, int hidden_layers = 3, std::uint64_t seed = 2);
    std::vector<double> forward(const std::vector<cplx>& y_info, double gamma_linear) const;
};

// Exact posterior bit LLRs for y = sqrt(rho) * x + n, n ~ CN(0, noise_var),
// x drawn uniformly from the set. Clipped to +-kLlrMax.
std::vector<double> exact_llr_demap(const std::vector<cplx>& y_info, const ConstellationSet& set,
                                    double noise_var, double rho);

// Fading variant with per-symbol coefficients (genie CSI): symbol s is
// demapped against sqrt(rho) * h[s] * set.
std::vector<double> exact_llr_demap_csi(const std::vector<cplx>& y_info,
                                        const ConstellationSet& set, double noise_var, double rho,
                                        const std::vector<cplx>& h);

// CSV export (index, re, im) for constellation diagrams.
std::string constellation_csv(const ConstellationSet& set);

} // namespace iden::modem
