#include "iden/phy.hpp"

#include <cmath>

namespace iden::phy {

ChannelOut channel_apply(const std::vector<cplx>& x, const ChannelSpec& spec, std::mt19937_64& rng) {
    if (spec.noise_power_mw < 0.0) throw std::invalid_argument("channel: negative noise power");
    ChannelOut out;
    out.y.resize(x.size());
    out.h.assign(x.size(), cplx(1.0, 0.0));
    const double ns = std::sqrt(spec.noise_power_mw / 2.0);
    for (size_t i = 0; i < x.size(); ++i) {
        if (spec.kind == ChannelKind::Rayleigh)
            out.h[i] = cplx(gauss(rng, std::sqrt(0.5)), gauss(rng, std::sqrt(0.5)));
        cplx n = spec.noise_power_mw > 0.0 ? cplx(gauss(rng, ns), gauss(rng, ns)) : cplx(0.0, 0.0);
        out.y[i] = out.h[i] * x[i] + n;
    }
    return out;
}

PowerSplit PowerSplit::from_rho(double rho_value) {
    if (rho_value <= 0.0 || rho_value >= 1.0)
        throw std::invalid_argument("power split: rho must lie strictly inside (0,1)");
    PowerSplit s;
    s.rho_logit = std::log(rho_value / (1.0 - rho_value));
    return s;
}

SplitOut power_split(const std::vector<cplx>& y, const PowerSplit& split, std::mt19937_64& rng) {
    const double rho = split.rho();
    const double srho = std::sqrt(rho);
    const double nb = split.sigma_b2 > 0.0 ? std::sqrt(split.sigma_b2 / 2.0) : 0.0;
    SplitOut out;
    out.info.resize(y.size());
    double s = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        s += std::norm(y[i]);
        cplx n = nb > 0.0 ? cplx(gauss(rng, nb), gauss(rng, nb)) : cplx(0.0, 0.0);
        out.info[i] = srho * y[i] + n;
    }
    s /= (double)y.size();
    out.received_power_mw = s;
    // One branch share is a single rounded product; the other is its exact
    // complement (Sterbenz: the larger share lies in [s/2, s], so the
    // subtraction is exact and the two shares sum to s bit-exactly).
    if (rho >= 0.5) {
        out.p_info_mw = rho * s;
        out.p_in_mw = s - out.p_info_mw;
    } else {
        out.p_in_mw = (1.0 - rho) * s;
        out.p_info_mw = s - out.p_in_mw;
    }
    return out;
}

double eh_reference(double p_in_mw, const EhParams& params) {
    if (p_in_mw < 0.0) throw std::invalid_argument("eh_reference: negative input power");
    const double s0 = sigmoid(-params.a_per_mw * params.b_mw);
    return params.p_sat_mw * (sigmoid(params.a_per_mw * (p_in_mw - params.b_mw)) - s0) / (1.0 - s0);
}

double EhNet::forward(double p_in_mw) const {
    const double p = clip(p_in_mw, fit_min, fit_max);
    return net.forward({p / in_scale})[0] * out_scale;
}

double dbm_to_mw(double p_dbm) { return std::pow(10.0, p_dbm / 10.0); }

double mw_to_dbm(double p_mw) {
    if (p_mw <= 0.0) throw std::domain_error("mw_to_dbm: power must be positive");
    return 10.0 * std::log10(p_mw);
}

} // namespace iden::phy
