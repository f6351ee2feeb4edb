#include "iden/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iden::polar {

void CodeConfig::validate() const {
    if (!is_pow2(n_bits)) throw std::invalid_argument("code length must be a power of two");
    if (k_info < 0 || k_info > n_bits) throw std::invalid_argument("info count out of range");
    if (!frozen_mask.empty() && (int)frozen_mask.size() != n_bits)
        throw std::invalid_argument("frozen mask length mismatch");
}

std::vector<double> SoftSelection::f_pro() const {
    std::vector<double> p(f_soft.size());
    for (size_t i = 0; i < f_soft.size(); ++i) p[i] = sigmoid(f_soft[i]);
    return p;
}

BitVec encode(const BitVec& u) {
    const int n = (int)u.size();
    if (!is_pow2(n)) throw std::invalid_argument("polar encode: length must be a power of two");
    BitVec c = u;
    for (int h = 1; h < n; h <<= 1)
        for (int i = 0; i < n; i += 2 * h)
            for (int j = i; j < i + h; ++j)
                c[j] ^= c[j + h];
    return c;
}

BitVec place_bits(const BitVec& b, const Mask& mask) {
    const int k = count_info(mask);
    if ((int)b.size() != k) throw std::invalid_argument("place_bits: payload length does not match info count");
    BitVec u(mask.size(), 0);
    size_t next = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) u[i] = b[next++];
    return u;
}

Mask bnn_binarize(const std::vector<double>& f_pro, const std::vector<double>& p_u) {
    if (f_pro.size() != p_u.size()) throw std::invalid_argument("bnn_binarize: length mismatch");
    Mask m(f_pro.size());
    for (size_t i = 0; i < f_pro.size(); ++i) m[i] = f_pro[i] > p_u[i] ? 1 : 0;
    return m;
}

Mask select_top_k(const std::vector<double>& f_soft, int k) {
    const int n = (int)f_soft.size();
    if (k > n || k < 0) throw std::invalid_argument("select_top_k: K out of range");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return f_soft[a] > f_soft[b]; });
    Mask m(n, 0);
    for (int i = 0; i < k; ++i) m[order[i]] = 1;
    return m;
}

double rate_of(const std::vector<double>& f_soft) {
    double s = 0.0;
    for (double x : f_soft) s += sigmoid(x);
    return f_soft.empty() ? 0.0 : s / (double)f_soft.size();
}

// ---- Gaussian approximation ----------------------------------------------

namespace {

// Two-segment fit of phi(x) = 1 - E[tanh(L/2)], L ~ N(x, 2x).
double phi(double x) {
    if (x < 1e-12) return 1.0;
    if (x < 10.0) return std::exp(-0.4527 * std::pow(x, 0.86) + 0.0218);
    return std::sqrt(M_PI / x) * std::exp(-x / 4.0) * (1.0 - 10.0 / (7.0 * x));
}

double phi_inv(double y) {
    // phi is monotone decreasing on [0, inf); bisect.
    double lo = 0.0, hi = 1e9;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (phi(mid) > y) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Mask top_k_mask(const std::vector<double>& metric, int k, bool ties_high_index) {
    const int n = (int)metric.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (metric[a] != metric[b]) return metric[a] > metric[b];
        return ties_high_index ? a > b : a < b;
    });
    Mask m(n, 0);
    for (int i = 0; i < k; ++i) m[order[i]] = 1;
    return m;
}

} // namespace

std::vector<double> ga_means(int n, double design_esn0_db) {
    log2_exact(n);
    const double esn0 = std::pow(10.0, design_esn0_db / 10.0);
    std::vector<double> means{4.0 * esn0};
    while ((int)means.size() < n) {
        std::vector<double> next;
        next.reserve(means.size() * 2);
        for (double m : means) {
            next.push_back(phi_inv(1.0 - (1.0 - phi(m)) * (1.0 - phi(m))));
            next.push_back(2.0 * m);
        }
        means.swap(next);
    }
    return means;
}

Mask construct_ga(int n, int k, double design_esn0_db) {
    if (k > n) throw std::invalid_argument("construct_ga: K > N");
    return top_k_mask(ga_means(n, design_esn0_db), k, /*ties_high_index=*/false);
}

// ---- Polarization weight ---------------------------------------------------

std::vector<double> pw_weights(int n) {
    const int stages = log2_exact(n);
    const double beta = std::pow(2.0, 0.25);
    std::vector<double> w(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < stages; ++j)
            if ((i >> j) & 1) w[i] += std::pow(beta, j);
    return w;
}

Mask construct_pw(int n, int k) {
    if (k > n) throw std::invalid_argument("construct_pw: K > N");
    return top_k_mask(pw_weights(n), k, /*ties_high_index=*/true);
}

// ---- Universal reliability sequence ----------------------------------------

Mask construct_5g(int n, int k) {
    const auto& seq = reliability_sequence_1024();
    if (n > (int)seq.size()) throw std::invalid_argument("construct_5g: N exceeds bundled table size (1024)");
    if (k > n) throw std::invalid_argument("construct_5g: K > N");
    log2_exact(n);
    Mask m(n, 0);
    int taken = 0;
    for (auto it = seq.rbegin(); it != seq.rend() && taken < k; ++it) {
        if (*it < n) {
            m[*it] = 1;
            ++taken;
        }
    }
    return m;
}

} // namespace iden::polar
