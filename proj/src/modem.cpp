#include "iden/modem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace iden::modem {

double ConstellationSet::mean_power() const {
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += re[m] * re[m] + im[m] * im[m];
    return s / (double)M;
}

ConstellationSet qam_constellation(int M, double p_tr) {
    if (M != 4 && M != 16 && M != 64) throw std::invalid_argument("qam_constellation: unsupported order");
    if (p_tr <= 0.0) throw std::invalid_argument("qam_constellation: transmit power must be positive");
    const int bps = log2_exact(M);
    const int side = 1 << (bps / 2);
    // Gray labeling per axis; unit-spaced odd levels scaled to the power target.
    const double scale = std::sqrt(3.0 * p_tr / (2.0 * (M - 1)));
    auto gray_to_level = [&](int g) {
        int b = 0;
        for (int x = g; x; x >>= 1) b ^= x; // inverse of b ^ (b >> 1)
        return (2 * b - (side - 1)) * scale;
    };
    ConstellationSet set;
    set.M = M;
    set.p_tr = p_tr;
    set.re.resize(M);
    set.im.resize(M);
    for (int m = 0; m < M; ++m) {
        const int gi = m >> (bps / 2);        // leading bits drive the I axis
        const int gq = m & (side - 1);
        set.re[m] = gray_to_level(gi);
        set.im[m] = gray_to_level(gq);
    }
    return set;
}

OneHotBlock one_hot_map(const BitVec& bits, int M) {
    const int bps = log2_exact(M);
    if (bits.size() % bps != 0)
        throw std::invalid_argument("one_hot_map: bit count not divisible by log2(M)");
    OneHotBlock v;
    v.M = M;
    v.indices.reserve(bits.size() / bps);
    for (size_t g = 0; g < bits.size(); g += bps) {
        int idx = 0;
        for (int b = 0; b < bps; ++b) idx = (idx << 1) | bits[g + b];
        v.indices.push_back(idx);
    }
    return v;
}

std::vector<std::uint8_t> OneHotBlock::dense() const {
    std::vector<std::uint8_t> d((size_t)M * indices.size(), 0);
    for (size_t s = 0; s < indices.size(); ++s) d[(size_t)indices[s] * indices.size() + s] = 1;
    return d;
}

std::vector<cplx> modulate(const OneHotBlock& v, const ConstellationSet& set) {
    if (v.M != set.M) throw std::invalid_argument("modulate: order mismatch");
    std::vector<cplx> x;
    x.reserve(v.indices.size());
    for (int idx : v.indices) {
        if (idx < 0 || idx >= set.M) throw std::invalid_argument("modulate: symbol index out of range");
        x.push_back(set.point(idx));
    }
    return x;
}

// ---- trainable mapper / demapper -------------------------------------------

MapperNet MapperNet::make(int M, double p_tr, int hidden, int hidden_layers, std::uint64_t seed) {
    MapperNet m;
    m.M = M;
    m.p_tr = p_tr;
    std::vector<int> widths{1};
    std::vector<nn::Act> acts;
    for (int i = 0; i < hidden_layers; ++i) {
        widths.push_back(hidden);
        acts.push_back(nn::Act::Relu);
    }
    widths.push_back(2 * M);
    acts.push_back(nn::Act::Linear);
    m.net = nn::Mlp::make(widths, acts, /*bias=*/true, seed);
    return m;
}

ConstellationSet MapperNet::forward(double gamma_linear) const {
    if (gamma_linear <= 0.0) throw std::invalid_argument("mapper: SNR must be positive");
    const double g_db = 10.0 * std::log10(gamma_linear);
    const auto raw = net.forward({(g_db - snr_mean_db) / snr_std_db});
    ConstellationSet set;
    set.M = M;
    set.p_tr = p_tr;
    set.re.resize(M);
    set.im.resize(M);
    double power = 0.0;
    for (int m = 0; m < M; ++m) {
        set.re[m] = raw[2 * m];
        set.im[m] = raw[2 * m + 1];
        power += set.re[m] * set.re[m] + set.im[m] * set.im[m];
    }
    power /= (double)M;
    if (power <= 0.0) throw std::runtime_error("mapper: degenerate constellation (all points at origin)");
    const double scale = std::sqrt(p_tr / power);
    for (int m = 0; m < M; ++m) {
        set.re[m] *= scale;
        set.im[m] *= scale;
    }
    // Degeneracy guard: coinciding points silently collapse the rate.
    for (int a = 0; a < M; ++a)
        for (int b = a + 1; b < M; ++b) {
            const double dr = set.re[a] - set.re[b], di = set.im[a] - set.im[b];
            if (std::sqrt(dr * dr + di * di) < 1e-6)
                throw std::runtime_error("mapper: degenerate constellation (coinciding points)");
        }
    return set;
}

DemapperNet DemapperNet::make(int M, int hidden, int hidden_layers, std::uint64_t seed) {
    DemapperNet d;
    d.M = M;
    std::vector<int> widths{3};
    std::vector<nn::Act> acts;
    for (int i = 0; i < hidden_layers; ++i) {
        widths.push_back(hidden);
        acts.push_back(nn::Act::Relu);
    }
    widths.push_back(log2_exact(M));
    acts.push_back(nn::Act::Linear);
    d.net = nn::Mlp::make(widths, acts, /*bias=*/true, seed);
    return d;
}

std::vector<double> DemapperNet::forward(const std::vector<cplx>& y_info, double gamma_linear) const {
    const double g_std = (10.0 * std::log10(gamma_linear) - snr_mean_db) / snr_std_db;
    std::vector<double> llrs;
    llrs.reserve(y_info.size() * log2_exact(M));
    for (const auto& y : y_info) {
        const auto out = net.forward({y.real(), y.imag(), g_std});
        llrs.insert(llrs.end(), out.begin(), out.end());
    }
    return llrs;
}

std::vector<double> exact_llr_demap(const std::vector<cplx>& y_info, const ConstellationSet& set,
                                    double noise_var, double rho) {
    if (noise_var <= 0.0) throw std::invalid_argument("exact_llr_demap: noise variance must be positive");
    const int bps = set.bits_per_symbol();
    const double srho = std::sqrt(rho);
    std::vector<double> llrs;
    llrs.reserve(y_info.size() * bps);
    std::vector<double> metric(set.M);
    for (const auto& y : y_info) {
        for (int m = 0; m < set.M; ++m) {
            const double dr = y.real() - srho * set.re[m];
            const double di = y.imag() - srho * set.im[m];
            metric[m] = -(dr * dr + di * di) / noise_var;
        }
        for (int b = 0; b < bps; ++b) {
            const int bitpos = bps - 1 - b; // bit b of the group is the index's high bit
            double max0 = -1e300, max1 = -1e300;
            for (int m = 0; m < set.M; ++m) {
                double& mx = ((m >> bitpos) & 1) ? max1 : max0;
                mx = std::max(mx, metric[m]);
            }
            double s0 = 0.0, s1 = 0.0;
            for (int m = 0; m < set.M; ++m) {
                if ((m >> bitpos) & 1) s1 += std::exp(metric[m] - max1);
                else s0 += std::exp(metric[m] - max0);
            }
            const double llr = (max0 + std::log(s0)) - (max1 + std::log(s1));
            llrs.push_back(clip(llr, -kLlrMax, kLlrMax));
        }
    }
    return llrs;
}

std::vector<double> exact_llr_demap_csi(const std::vector<cplx>& y_info,
                                        const ConstellationSet& set, double noise_var, double rho,
                                        const std::vector<cplx>& h) {
    if (noise_var <= 0.0) throw std::invalid_argument("exact_llr_demap_csi: noise variance must be positive");
    if (h.size() != y_info.size()) throw std::invalid_argument("exact_llr_demap_csi: h length mismatch");
    const int bps = set.bits_per_symbol();
    const double srho = std::sqrt(rho);
    std::vector<double> llrs;
    llrs.reserve(y_info.size() * bps);
    std::vector<double> metric(set.M);
    for (size_t s = 0; s < y_info.size(); ++s) {
        for (int m = 0; m < set.M; ++m) {
            const cplx p = srho * h[s] * set.point(m);
            const double dr = y_info[s].real() - p.real();
            const double di = y_info[s].imag() - p.imag();
            metric[m] = -(dr * dr + di * di) / noise_var;
        }
        for (int b = 0; b < bps; ++b) {
            const int bitpos = bps - 1 - b;
            double max0 = -1e300, max1 = -1e300;
            for (int m = 0; m < set.M; ++m) {
                double& mx = ((m >> bitpos) & 1) ? max1 : max0;
                mx = std::max(mx, metric[m]);
            }
            double s0 = 0.0, s1 = 0.0;
            for (int m = 0; m < set.M; ++m) {
                if ((m >> bitpos) & 1) s1 += std::exp(metric[m] - max1);
                else s0 += std::exp(metric[m] - max0);
            }
            llrs.push_back(clip((max0 + std::log(s0)) - (max1 + std::log(s1)), -kLlrMax, kLlrMax));
        }
    }
    return llrs;
}

std::string constellation_csv(const ConstellationSet& set) {
    std::ostringstream os;
    os << "# idenlink csv v1 constellation\n";
    os << "index,re,im\n";
    char buf[80];
    for (int m = 0; m < set.M; ++m) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", m, set.re[m], set.im[m]);
        os << buf;
    }
    return os.str();
}

} // namespace iden::modem
