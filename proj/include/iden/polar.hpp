#pragma once

#include "iden/common.hpp"

namespace iden::polar {

// Identity of a polar code: length, target info count and the info/frozen
// flags (1 = info). During training the realised info count may differ from
// k_info; at test time exactly k_info flags are set.
struct CodeConfig {
    int n_bits = 0;
    int k_info = 0;
    Mask frozen_mask;

    int stages() const { return log2_exact(n_bits); }
    void validate() const;
};

// Trainable selection logits; f_pro = sigmoid(f_soft) are per-position
// probabilities of being an info position.
struct SoftSelection {
    std::vector<double> f_soft;

    std::vector<double> f_pro() const;
};

// c = u * G_N over GF(2) with G_N the n-fold Kronecker power of [[1,0],[1,1]],
// natural (non bit-reversed) ordering. In-place butterfly, N log2 N XORs.
// The transform is an involution: encoding twice returns u.
BitVec encode(const BitVec& u);

// Scatter b into the info positions of the mask (in index order); frozen
// positions are zero.
BitVec place_bits(const BitVec& b, const Mask& mask);

// Stochastic binarization: position i is info iff f_pro[i] > p_u[i]
// (equality freezes). The backward rule is straight-through; see the
// training tape's st_binarize primitive.
Mask bnn_binarize(const std::vector<double>& f_pro, const std::vector<double>& p_u);

// Deterministic test-time selection: info at the K largest logits, ties going
// to the lower index.
Mask select_top_k(const std::vector<double>& f_soft, int k);

// Average code rate (1/N) sum sigmoid(f_soft[i]).
double rate_of(const std::vector<double>& f_soft);

// Gaussian-approximation density evolution of mean LLRs (two-segment
// phi fit). design_esn0_db is the per-symbol design SNR of the BPSK
// surrogate channel; initial mean is 4 * 10^(design/10).
Mask construct_ga(int n, int k, double design_esn0_db);
std::vector<double> ga_means(int n, double design_esn0_db);

// Polarization-weight (beta-expansion) construction, beta = 2^(1/4).
// Ties go to the higher index.
Mask construct_pw(int n, int k);
std::vector<double> pw_weights(int n);

// Universal reliability sequence construction (bundled table, N <= 1024).
// The same table ships as data/nr_polar_reliability_nmax1024.txt, one index
// per line, most reliable last.
Mask construct_5g(int n, int k);
const std::vector<int>& reliability_sequence_1024();

} // namespace iden::polar
