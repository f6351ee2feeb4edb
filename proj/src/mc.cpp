#include "iden/mc.hpp"

#include "iden/rng.hpp"
#include "iden/serialize.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iden::mc {

using nlohmann::json;

void SimConfig::validate() const {
    if (!is_pow2(n)) throw std::invalid_argument("config: code length must be a power of two");
    if (k < 0 || k > n) throw std::invalid_argument("config: info count out of range");
    if (!is_pow2(mod_order) || mod_order < 2) throw std::invalid_argument("config: modulation order must be a power of two");
    if (n % log2_exact(mod_order) != 0) throw std::invalid_argument("config: N not divisible by log2(M)");
    if (rho <= 0.0 || rho >= 1.0) {
        if (rho != 1.0) throw std::invalid_argument("config: rho must lie in (0,1) or be exactly 1");
    }
    if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
    if (list_size < 1) throw std::invalid_argument("config: list size must be >= 1");
    if (max_frames == 0) throw std::invalid_argument("config: frame budget must be positive");
    if (construction == ConstructionKind::Learned && (int)f_soft.size() != n)
        throw std::invalid_argument("config: learned construction requires N selection logits");
    if (mapper == MapperKind::Ae && mapper_checkpoint.empty())
        throw std::invalid_argument("config: AE mapper requires a checkpoint");
}

namespace {

DecoderKind decoder_from_string(const std::string& s) {
    if (s == "sc") return DecoderKind::Sc;
    if (s == "scl") return DecoderKind::Scl;
    if (s == "bp") return DecoderKind::Bp;
    if (s == "flat-bp") return DecoderKind::FlatBp;
    if (s == "hyper-bp") return DecoderKind::HyperBp;
    throw std::invalid_argument("config: unknown decoder kind " + s);
}

ConstructionKind construction_from_string(const std::string& s) {
    if (s == "ga") return ConstructionKind::Ga;
    if (s == "pw") return ConstructionKind::Pw;
    if (s == "5g") return ConstructionKind::Nr5g;
    if (s == "learned") return ConstructionKind::Learned;
    throw std::invalid_argument("config: unknown construction " + s);
}

} // namespace

SimConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot read " + path);
    json j;
    is >> j;
    SimConfig c;
    if (j.contains("code")) {
        const auto& code = j["code"];
        c.n = code.value("n", c.n);
        c.k = code.value("k", c.k);
        if (code.contains("construction")) c.construction = construction_from_string(code["construction"]);
        c.design_snr_db = code.value("design_snr_db", c.design_snr_db);
        if (code.contains("checkpoint")) {
            // learned construction: selection logits from a trained bundle
            const auto arrays = ckpt::load_arrays(code["checkpoint"].get<std::string>());
            c.f_soft = arrays.at("f_soft").v;
        }
    }
    if (j.contains("modulation")) {
        const auto& m = j["modulation"];
        c.mod_order = m.value("order", c.mod_order);
        if (m.value("mapper", "qam") == "ae") c.mapper = MapperKind::Ae;
        c.mapper_checkpoint = m.value("checkpoint", "");
        c.demapper_checkpoint = m.value("demapper_checkpoint", "");
    }
    if (j.contains("decoder")) {
        const auto& d = j["decoder"];
        if (d.contains("kind")) c.decoder = decoder_from_string(d["kind"]);
        c.iterations = d.value("iterations", c.iterations);
        c.list_size = d.value("list_size", c.list_size);
        c.exact_f = d.value("exact_f", c.exact_f);
        c.decoder_checkpoint = d.value("checkpoint", "");
    }
    if (j.contains("channel")) {
        const auto& ch = j["channel"];
        if (ch.value("kind", "awgn") == "rayleigh") c.channel = phy::ChannelKind::Rayleigh;
        c.p_n_dbm = ch.value("noise_dbm", c.p_n_dbm);
    }
    if (j.contains("power")) {
        const auto& p = j["power"];
        c.p_tr_dbm = p.value("tx_dbm", c.p_tr_dbm);
        c.rho = p.value("rho", c.rho);
        if (p.contains("checkpoint")) {
            // trained splitting factor from a bundle's rho logit
            const auto arrays = ckpt::load_arrays(p["checkpoint"].get<std::string>());
            c.rho = clip(sigmoid(arrays.at("rho_logit").v[0]), 1e-9, 1.0 - 1e-9);
        }
        if (p.contains("sigma_b2_mw")) {
            c.sigma_b2_auto = false;
            c.sigma_b2_mw = p["sigma_b2_mw"].get<double>();
        }
    }
    if (j.contains("energy")) {
        const auto& e = j["energy"];
        c.eh_params.p_sat_mw = e.value("p_sat_mw", c.eh_params.p_sat_mw);
        c.eh_params.a_per_mw = e.value("a_per_mw", c.eh_params.a_per_mw);
        c.eh_params.b_mw = e.value("b_mw", c.eh_params.b_mw);
        c.eh_checkpoint = e.value("checkpoint", "");
        c.p_targ_mw = e.value("p_targ_mw", c.p_targ_mw);
    }
    if (j.contains("mc")) {
        const auto& m = j["mc"];
        c.max_frames = m.value("max_frames", c.max_frames);
        c.target_block_errors = m.value("target_block_errors", c.target_block_errors);
        c.chunk = m.value("chunk", c.chunk);
    }
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

// ---- chain ---------------------------------------------------------------------

struct Chain {
    Mask mask;
    modem::ConstellationSet set;
    std::optional<modem::DemapperNet> demapper;
    std::optional<dec::HyperNet> hyper;
    std::optional<dec::IterWeights> flat;
    std::optional<phy::EhNet> eh;
    double gamma_linear = 1.0;
    int K = 0;
};

std::shared_ptr<Chain> build_chain(const SimConfig& cfg) {
    cfg.validate();
    auto chain = std::make_shared<Chain>();
    switch (cfg.construction) {
        case ConstructionKind::Ga: chain->mask = polar::construct_ga(cfg.n, cfg.k, cfg.design_snr_db); break;
        case ConstructionKind::Pw: chain->mask = polar::construct_pw(cfg.n, cfg.k); break;
        case ConstructionKind::Nr5g: chain->mask = polar::construct_5g(cfg.n, cfg.k); break;
        case ConstructionKind::Learned: chain->mask = polar::select_top_k(cfg.f_soft, cfg.k); break;
    }
    chain->K = count_info(chain->mask);
    chain->gamma_linear = cfg.p_tr_mw() / cfg.p_n_mw();
    if (cfg.mapper == MapperKind::Qam) {
        chain->set = modem::qam_constellation(cfg.mod_order, cfg.p_tr_mw());
    } else {
        auto arrays = ckpt::load_arrays(cfg.mapper_checkpoint);
        auto mapper = ckpt::get_mapper(arrays);
        mapper.p_tr = cfg.p_tr_mw();
        chain->set = mapper.forward(chain->gamma_linear);
    }
    if (!cfg.demapper_checkpoint.empty())
        chain->demapper = ckpt::get_demapper(ckpt::load_arrays(cfg.demapper_checkpoint));
    if (cfg.decoder == DecoderKind::HyperBp) {
        if (cfg.decoder_checkpoint.empty()) {
            auto net = dec::HyperNet::make(cfg.n, 8, 3, cfg.iterations, cfg.seed);
            for (auto& w : net.W)
                for (auto& x : w) x = 0.0; // untrained: plain min-sum
            chain->hyper = std::move(net);
        } else {
            chain->hyper = ckpt::get_hyper(ckpt::load_arrays(cfg.decoder_checkpoint));
        }
    }
    if (cfg.decoder == DecoderKind::FlatBp) {
        if (cfg.decoder_checkpoint.empty())
            throw std::invalid_argument("config: flat-bp decoder requires a checkpoint");
        chain->flat = ckpt::get_flat(ckpt::load_arrays(cfg.decoder_checkpoint));
    }
    if (!cfg.eh_checkpoint.empty()) chain->eh = ckpt::get_eh(ckpt::load_arrays(cfg.eh_checkpoint));
    return chain;
}

namespace {

struct FrameOutcome {
    std::uint32_t bit_errors = 0;
    std::uint8_t block_error = 0;
    double p_out_mw = 0.0;
};

FrameOutcome run_frame(const SimConfig& cfg, const Chain& chain, std::uint64_t frame) {
    auto rng = make_rng(cfg.seed, frame);
    const int K = chain.K;
    BitVec b(K);
    for (auto& x : b) x = rng() & 1;
    const BitVec c = polar::encode(polar::place_bits(b, chain.mask));
    const auto x = modem::modulate(modem::one_hot_map(c, cfg.mod_order), chain.set);

    phy::ChannelSpec spec{cfg.channel, cfg.p_n_mw()};
    const auto ch = phy::channel_apply(x, spec, rng);

    phy::PowerSplit split = cfg.rho < 1.0 ? phy::PowerSplit::from_rho(cfg.rho)
                                          : phy::PowerSplit{40.0, 0.0};
    split.sigma_b2 = cfg.sigma_b2_effective();
    const double rho = split.rho();
    const auto sp = phy::power_split(ch.y, split, rng);

    FrameOutcome out;
    out.p_out_mw = chain.eh ? chain.eh->forward(sp.p_in_mw) : phy::eh_reference(sp.p_in_mw, cfg.eh_params);

    const double noise_var = rho * cfg.p_n_mw() + split.sigma_b2;
    std::vector<double> llrs;
    if (chain.demapper) {
        std::vector<modem::cplx> z = sp.info;
        if (cfg.channel == phy::ChannelKind::Rayleigh)
            for (size_t s = 0; s < z.size(); ++s) z[s] /= ch.h[s];
        llrs = chain.demapper->forward(z, chain.gamma_linear);
    } else if (cfg.channel == phy::ChannelKind::Rayleigh) {
        llrs = modem::exact_llr_demap_csi(sp.info, chain.set, noise_var, rho, ch.h);
    } else {
        llrs = modem::exact_llr_demap(sp.info, chain.set, noise_var, rho);
    }

    BitVec decoded;
    switch (cfg.decoder) {
        case DecoderKind::Sc:
            decoded = dec::sc_decode(llrs, chain.mask, {cfg.exact_f}).info_bits;
            break;
        case DecoderKind::Scl:
            decoded = dec::scl_decode(llrs, chain.mask, cfg.list_size, {cfg.exact_f}).info_bits;
            break;
        case DecoderKind::Bp:
            decoded = dec::bp_decode_plain(llrs, chain.mask, cfg.iterations).info_bits;
            break;
        case DecoderKind::FlatBp:
            decoded = dec::bp_decode_iterweights(llrs, chain.mask, cfg.iterations, *chain.flat).info_bits;
            break;
        case DecoderKind::HyperBp:
            decoded = dec::hyper_bp_decode(llrs, chain.mask, cfg.iterations, *chain.hyper).info_bits;
            break;
    }
    for (int i = 0; i < K; ++i)
        if (decoded[i] != b[i]) ++out.bit_errors;
    out.block_error = out.bit_errors > 0 ? 1 : 0;
    return out;
}

// Mean harvested power only (decoder skipped): used by the sweep calibration.
double measure_p_out(const SimConfig& cfg, const Chain& chain, std::uint64_t frames) {
    double acc = 0.0;
    for (std::uint64_t f = 0; f < frames; ++f) {
        auto rng = make_rng(cfg.seed ^ 0x504f5554, f);
        BitVec b(chain.K);
        for (auto& x : b) x = rng() & 1;
        const BitVec c = polar::encode(polar::place_bits(b, chain.mask));
        const auto x = modem::modulate(modem::one_hot_map(c, cfg.mod_order), chain.set);
        phy::ChannelSpec spec{cfg.channel, cfg.p_n_mw()};
        const auto ch = phy::channel_apply(x, spec, rng);
        phy::PowerSplit split = cfg.rho < 1.0 ? phy::PowerSplit::from_rho(cfg.rho)
                                              : phy::PowerSplit{40.0, 0.0};
        split.sigma_b2 = cfg.sigma_b2_effective();
        const auto sp = phy::power_split(ch.y, split, rng);
        acc += chain.eh ? chain.eh->forward(sp.p_in_mw) : phy::eh_reference(sp.p_in_mw, cfg.eh_params);
    }
    return acc / (double)frames;
}

} // namespace

TrialResult run_monte_carlo(const SimConfig& cfg, const Chain& chain, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialResult res;
    double p_out_sum = 0.0;
    std::vector<FrameOutcome> outcomes(cfg.chunk);
    std::uint64_t next = 0;
    while (next < cfg.max_frames && res.block_errors < cfg.target_block_errors) {
        const std::uint64_t count = std::min<std::uint64_t>(cfg.chunk, cfg.max_frames - next);
#ifndef _OPENMP
        (void)workers; // serial fallback
#else
#pragma omp parallel for schedule(static) num_threads(workers > 0 ? workers : 1) if (workers > 1)
#endif
        for (std::int64_t i = 0; i < (std::int64_t)count; ++i)
            outcomes[i] = run_frame(cfg, chain, next + (std::uint64_t)i);
        // Serial, index-ordered reduction: identical bytes for any worker count.
        for (std::uint64_t i = 0; i < count; ++i) {
            res.bit_errors += outcomes[i].bit_errors;
            res.block_errors += outcomes[i].block_error;
            p_out_sum += outcomes[i].p_out_mw;
        }
        next += count;
    }
    res.frames = next;
    res.ber = chain.K > 0 ? (double)res.bit_errors / ((double)res.frames * chain.K) : 0.0;
    res.bler = (double)res.block_errors / (double)res.frames;
    res.mean_p_out_mw = p_out_sum / (double)res.frames;
    res.mean_rho = cfg.rho;
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

TrialResult run_monte_carlo(const SimConfig& cfg, int workers) {
    auto chain = build_chain(cfg);
    return run_monte_carlo(cfg, *chain, workers);
}

// ---- complexity ------------------------------------------------------------------

dec::OpCounters count_ops(DecoderKind kind, int n_bits, int iterations, int k_h, int L) {
    const std::uint64_t n = (std::uint64_t)log2_exact(n_bits);
    const std::uint64_t N = (std::uint64_t)n_bits;
    const std::uint64_t T = (std::uint64_t)iterations;
    dec::OpCounters c;
    switch (kind) {
        case DecoderKind::Bp:
            c.additions = 2 * T * N * n;
            break;
        case DecoderKind::FlatBp:
            c.additions = 2 * T * N * n;
            c.multiplications = 2 * T * N * n;
            c.memory_slots = 2 * T * N * n;
            break;
        case DecoderKind::HyperBp:
            c.additions = 2 * T * N * n;
            c.multiplications = 2 * T * N * n + (std::uint64_t)k_h * T * N * n +
                                (std::uint64_t)(L - 1) * k_h * k_h * T + (std::uint64_t)k_h * T;
            c.memory_slots = 3 * N * n + (std::uint64_t)k_h * L;
            break;
        default:
            throw std::invalid_argument("count_ops: counters are defined for bp, flat-bp and hyper-bp");
    }
    return c;
}

// ---- energy sweep -----------------------------------------------------------------

std::vector<SweepPoint> sweep_energy(const SimConfig& cfg, const std::vector<double>& targets,
                                     int workers) {
    if (targets.size() < 2) throw std::invalid_argument("sweep_energy: need at least two targets");
    auto chain = build_chain(cfg);
    const std::uint64_t cal_frames = 400;
    std::vector<SweepPoint> out;
    for (double targ : targets) {
        SweepPoint pt;
        pt.p_targ_mw = targ;
        // Harvested power decreases in rho; bracket then bisect on the
        // measured calibration mean.
        SimConfig probe = cfg;
        probe.rho = 1e-4;
        const double hi_power = measure_p_out(probe, *chain, cal_frames);
        probe.rho = 1.0 - 1e-4;
        const double lo_power = measure_p_out(probe, *chain, cal_frames);
        if (targ > hi_power || targ < lo_power) {
            pt.feasible = false;
            out.push_back(pt);
            continue;
        }
        double lo = 1e-4, hi = 1.0 - 1e-4;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            probe.rho = mid;
            const double p = measure_p_out(probe, *chain, cal_frames);
            if (p > targ) lo = mid;
            else hi = mid;
        }
        probe.rho = 0.5 * (lo + hi);
        pt.rho = probe.rho;
        const auto trial = run_monte_carlo(probe, *chain, workers);
        pt.p_out_mw = trial.mean_p_out_mw;
        pt.ber = trial.ber;
        pt.bler = trial.bler;
        out.push_back(pt);
    }
    return out;
}

// ---- adaptability -----------------------------------------------------------------

std::vector<AdaptCell> adaptability_matrix(const SimConfig& cfg, const dec::HyperNet& hyper,
                                           const dec::IterWeights& flat,
                                           const std::vector<int>& t_tests, int workers) {
    SimConfig base = cfg;
    base.decoder = DecoderKind::Bp;
    base.decoder_checkpoint.clear();
    auto chain = build_chain(base);
    chain->hyper = hyper;
    chain->flat = flat;
    const std::pair<const char*, DecoderKind> kinds[] = {
        {"bp", DecoderKind::Bp}, {"flat-bp", DecoderKind::FlatBp}, {"hyper-bp", DecoderKind::HyperBp}};
    std::vector<AdaptCell> cells;
    for (int t : t_tests) {
        for (const auto& [name, kind] : kinds) {
            SimConfig c = cfg;
            c.iterations = t;
            c.decoder = kind;
            c.decoder_checkpoint.clear();
            const auto r = run_monte_carlo(c, *chain, workers);
            cells.push_back({name, t, r.ber, r.bler});
        }
    }
    return cells;
}

// ---- bounds ------------------------------------------------------------------------

Curve shift_bound(const Curve& curve, double rho) {
    if (rho <= 0.0 || rho > 1.0) throw std::invalid_argument("shift_bound: rho out of range");
    const double shift = 10.0 * std::log10(rho);
    Curve out;
    out.reserve(curve.size());
    for (const auto& [snr, bler] : curve) out.emplace_back(snr + shift, bler);
    return out;
}

Curve normal_approx_curve(int n_symbols, int k_bits, double snr_db_min, double snr_db_max,
                          double step_db) {
    if (n_symbols < 1 || k_bits < 1) throw std::invalid_argument("normal_approx_curve: bad block size");
    Curve out;
    for (double s = snr_db_min; s <= snr_db_max + 1e-12; s += step_db) {
        const double g = std::pow(10.0, s / 10.0);
        const double cap = std::log(1.0 + g);                       // nats
        const double disp = 1.0 - 1.0 / ((1.0 + g) * (1.0 + g));    // nats^2
        const double num = n_symbols * cap - k_bits * M_LN2 + 0.5 * std::log((double)n_symbols);
        const double arg = num / std::sqrt(n_symbols * disp);
        const double bler = 0.5 * std::erfc(arg / std::sqrt(2.0));
        out.emplace_back(s, bler);
    }
    return out;
}

// ---- CSV -----------------------------------------------------------------------------

namespace {
std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
} // namespace

std::string trial_csv(const SimConfig& cfg, const TrialResult& r) {
    std::ostringstream os;
    os << "# idenlink csv v1 trial\n";
    os << "n,k,decoder,iterations,list_size,channel,p_tr_dbm,p_n_dbm,rho,seed,frames,bit_errors,"
          "block_errors,ber,bler,mean_p_out_mw\n";
    const char* dec_names[] = {"sc", "scl", "bp", "flat-bp", "hyper-bp"};
    os << cfg.n << ',' << cfg.k << ',' << dec_names[(int)cfg.decoder] << ',' << cfg.iterations << ','
       << cfg.list_size << ',' << (cfg.channel == phy::ChannelKind::Awgn ? "awgn" : "rayleigh") << ','
       << fmt(cfg.p_tr_dbm) << ',' << fmt(cfg.p_n_dbm) << ',' << fmt(cfg.rho) << ',' << cfg.seed << ','
       << r.frames << ',' << r.bit_errors << ',' << r.block_errors << ',' << fmt(r.ber) << ','
       << fmt(r.bler) << ',' << fmt(r.mean_p_out_mw) << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepPoint>& pts) {
    std::ostringstream os;
    os << "# idenlink csv v1 sweep\n";
    os << "p_targ_mw,feasible,rho,p_out_mw,ber,bler\n";
    for (const auto& p : pts)
        os << fmt(p.p_targ_mw) << ',' << (p.feasible ? 1 : 0) << ',' << fmt(p.rho) << ','
           << fmt(p.p_out_mw) << ',' << fmt(p.ber) << ',' << fmt(p.bler) << '\n';
    return os.str();
}

std::string adapt_csv(const std::vector<AdaptCell>& cells) {
    std::ostringstream os;
    os << "# idenlink csv v1 adapt\n";
    os << "decoder,t_test,ber,bler\n";
    for (const auto& c : cells)
        os << c.decoder << ',' << c.t_test << ',' << fmt(c.ber) << ',' << fmt(c.bler) << '\n';
    return os.str();
}

std::string curve_csv(const Curve& c) {
    std::ostringstream os;
    os << "# idenlink csv v1 curve\n";
    os << "snr_db,bler\n";
    for (const auto& [s, b] : c) os << fmt(s) << ',' << fmt(b) << '\n';
    return os.str();
}

Curve load_curve_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("curve: cannot read " + path);
    Curve out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || std::isalpha((unsigned char)line[0])) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        out.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    return out;
}

} // namespace iden::mc
