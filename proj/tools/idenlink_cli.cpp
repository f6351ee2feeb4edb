// Command-line front end: construction, Monte Carlo sweeps, training and the
// complexity counters. Outputs are CSV (see README for schemas).

#include "iden/mc.hpp"
#include "iden/serialize.hpp"
#include "iden/train.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

namespace {

void write_file(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
}

std::string history_csv(const std::vector<iden::learn::HistoryRow>& rows) {
    std::ostringstream os;
    os << "# idenlink csv v1 history\n";
    os << "epoch,loss,ber,p_out_mw,rate\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss, r.ber,
                      r.p_out_mw, r.rate);
        os << buf;
    }
    return os.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"idenlink: polar-coded data-and-energy link simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, ckpt_path, curve_path;
    std::uint64_t seed = 1;
    int workers = 1;

    // construct
    auto* construct = app.add_subcommand("construct", "emit a frozen/info mask");
    int c_n = 64, c_k = 32;
    std::string c_algo = "ga";
    double c_design = 2.0;
    construct->add_option("-N,--length", c_n, "code length");
    construct->add_option("-K,--info", c_k, "info bit count");
    construct->add_option("--algo", c_algo, "ga | pw | 5g");
    construct->add_option("--design-snr", c_design, "GA design SNR (dB)");
    construct->add_option("-o,--out", out_path, "output file (default stdout)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo BER/BLER/energy trial");
    simulate->add_option("-c,--config", config_path, "JSON config file")->required();
    simulate->add_option("--seed", seed, "RNG seed override");
    simulate->add_option("--workers", workers, "parallel workers");
    simulate->add_option("-o,--out", out_path, "output CSV");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "BER vs harvested-power trade-off sweep");
    std::vector<double> targets;
    sweep->add_option("-c,--config", config_path, "JSON config file")->required();
    sweep->add_option("--targets", targets, "harvested power targets (mW)")->required();
    sweep->add_option("--seed", seed, "RNG seed override");
    sweep->add_option("--workers", workers, "parallel workers");
    sweep->add_option("-o,--out", out_path, "output CSV");

    // train
    auto* train = app.add_subcommand("train", "train a component");
    std::string t_mode = "e2e", t_history;
    int t_steps = 0;
    train->add_option("-c,--config", config_path, "JSON config file")->required();
    train->add_option("--mode", t_mode, "e2e | hyper-bp | flat-bp | demapper");
    train->add_option("--steps", t_steps, "training steps/epochs override");
    train->add_option("--seed", seed, "RNG seed");
    train->add_option("--ckpt", ckpt_path, "checkpoint output path")->required();
    train->add_option("--history", t_history, "training history CSV (e2e)");

    // adapt
    auto* adapt = app.add_subcommand("adapt", "iteration-mismatch BER grid");
    std::string a_hyper, a_flat;
    std::vector<int> a_ts{3, 6};
    adapt->add_option("-c,--config", config_path, "JSON config file")->required();
    adapt->add_option("--hyper", a_hyper, "hypernet checkpoint")->required();
    adapt->add_option("--flat", a_flat, "per-iteration weights checkpoint")->required();
    adapt->add_option("--t-test", a_ts, "test iteration counts");
    adapt->add_option("--seed", seed, "RNG seed override");
    adapt->add_option("--workers", workers, "parallel workers");
    adapt->add_option("-o,--out", out_path, "output CSV");

    // count-ops
    auto* count = app.add_subcommand("count-ops", "decoder complexity counters");
    std::string k_kind = "bp";
    int k_n = 64, k_t = 50, k_kh = 8, k_l = 3;
    count->add_option("--decoder", k_kind, "bp | flat-bp | hyper-bp");
    count->add_option("-N,--length", k_n, "code length");
    count->add_option("-T,--iterations", k_t, "iterations");
    count->add_option("--kh", k_kh, "hypernet hidden width");
    count->add_option("--layers", k_l, "hypernet hidden layers");

    // fit-eh
    auto* fit = app.add_subcommand("fit-eh", "fit the harvester surrogate");
    std::string f_samples;
    double f_psat = 0.1, f_a = 1.5, f_b = 1.0, f_tol = 0.001, f_range = 10.0;
    int f_count = 1001;
    fit->add_option("--samples", f_samples, "CSV of p_in_mw,p_out_mw (default: reference curve grid)");
    fit->add_option("--p-sat", f_psat, "reference saturation power (mW)");
    fit->add_option("--steepness", f_a, "reference steepness (1/mW)");
    fit->add_option("--center", f_b, "reference center (mW)");
    fit->add_option("--range", f_range, "grid range (mW)");
    fit->add_option("--points", f_count, "grid points");
    fit->add_option("--tolerance", f_tol, "max abs fit error (mW)");
    fit->add_option("--seed", seed, "RNG seed");
    fit->add_option("--ckpt", ckpt_path, "checkpoint output path")->required();

    // export-constellation
    auto* expc = app.add_subcommand("export-constellation", "write constellation CSV");
    std::string e_ckpt;
    int e_m = 4;
    double e_ptr = 1.0, e_gamma_db = 6.0;
    expc->add_option("--ckpt", e_ckpt, "mapper checkpoint (QAM table if omitted)");
    expc->add_option("-M,--order", e_m, "modulation order");
    expc->add_option("--p-tr", e_ptr, "per-symbol power (mW)");
    expc->add_option("--gamma-db", e_gamma_db, "SNR fed to the mapper (dB)");
    expc->add_option("-o,--out", out_path, "output CSV");

    // shift-bound
    auto* shift = app.add_subcommand("shift-bound", "translate a BLER bound curve by 10 log10(rho)");
    double s_rho = 0.5;
    int s_n = 32, s_k = 32;
    double s_lo = 0.0, s_hi = 10.0, s_step = 0.5;
    shift->add_option("--curve", curve_path, "input curve CSV (snr_db,bler); proxy grid if omitted");
    shift->add_option("--rho", s_rho, "splitting factor")->required();
    shift->add_option("--n-symbols", s_n, "proxy blocklength (symbols)");
    shift->add_option("--k-bits", s_k, "proxy info bits");
    shift->add_option("--snr-min", s_lo, "proxy grid start (dB)");
    shift->add_option("--snr-max", s_hi, "proxy grid end (dB)");
    shift->add_option("--snr-step", s_step, "proxy grid step (dB)");
    shift->add_option("-o,--out", out_path, "output CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*construct) {
            iden::Mask mask;
            if (c_algo == "ga") mask = iden::polar::construct_ga(c_n, c_k, c_design);
            else if (c_algo == "pw") mask = iden::polar::construct_pw(c_n, c_k);
            else if (c_algo == "5g") mask = iden::polar::construct_5g(c_n, c_k);
            else throw std::invalid_argument("unknown construction algorithm " + c_algo);
            std::ostringstream os;
            os << "# idenlink csv v1 mask (1 = info)\n";
            for (auto f : mask) os << (int)f << '\n';
            write_file(out_path, os.str());
        } else if (*simulate) {
            auto cfg = iden::mc::load_config(config_path);
            if (simulate->count("--seed")) cfg.seed = seed;
            const auto r = iden::mc::run_monte_carlo(cfg, workers);
            write_file(out_path, iden::mc::trial_csv(cfg, r));
        } else if (*sweep) {
            auto cfg = iden::mc::load_config(config_path);
            if (sweep->count("--seed")) cfg.seed = seed;
            const auto pts = iden::mc::sweep_energy(cfg, targets, workers);
            write_file(out_path, iden::mc::sweep_csv(pts));
        } else if (*train) {
            auto cfg = iden::mc::load_config(config_path);
            iden::ckpt::ArrayMap arrays;
            if (t_mode == "hyper-bp" || t_mode == "flat-bp") {
                iden::learn::DecoderTrainConfig dc;
                dc.N = cfg.n;
                dc.K = cfg.k;
                dc.M = cfg.mod_order;
                dc.p_tr_mw = cfg.p_tr_mw();
                dc.p_n_mw = cfg.p_n_mw();
                dc.design_snr_db = cfg.design_snr_db;
                dc.rho = cfg.rho;
                dc.T = cfg.iterations;
                dc.seed = seed;
                if (t_steps > 0) dc.steps = t_steps;
                if (t_mode == "hyper-bp") {
                    iden::ckpt::put_hyper(arrays, iden::learn::train_hyper_decoder(dc));
                } else {
                    iden::ckpt::put_flat(arrays, iden::learn::train_flat_decoder(dc));
                }
            } else if (t_mode == "demapper") {
                auto set = iden::modem::qam_constellation(cfg.mod_order, cfg.p_tr_mw());
                auto net = iden::modem::DemapperNet::make(cfg.mod_order, 64, 3, seed);
                iden::learn::train_demapper(net, set, cfg.p_n_mw(), cfg.rho,
                                            t_steps > 0 ? t_steps : 2000, 256, 0.005, seed);
                iden::ckpt::put_demapper(arrays, net);
            } else if (t_mode == "e2e") {
                iden::learn::E2eConfig ec;
                ec.N = cfg.n;
                ec.K = cfg.k;
                ec.M = cfg.mod_order;
                ec.channel = cfg.channel;
                ec.p_tr_mw = cfg.p_tr_mw();
                ec.p_n_mw = cfg.p_n_mw();
                ec.p_targ_mw = cfg.p_targ_mw;
                ec.weights = iden::learn::LossWeights::defaults(cfg.p_targ_mw, (double)cfg.k / cfg.n);
                ec.T_train = cfg.iterations;
                ec.seed = seed;
                if (t_steps > 0) ec.epochs = t_steps;
                iden::phy::EhNet eh;
                if (!cfg.eh_checkpoint.empty()) {
                    eh = iden::ckpt::get_eh(iden::ckpt::load_arrays(cfg.eh_checkpoint));
                } else {
                    std::vector<std::pair<double, double>> samples;
                    for (int i = 0; i <= 1000; ++i) {
                        const double p = 10.0 * i / 1000.0;
                        samples.emplace_back(p, iden::phy::eh_reference(p, cfg.eh_params));
                    }
                    eh = iden::phy::eh_fit(samples, 0.01 * cfg.eh_params.p_sat_mw, seed);
                }
                auto res = iden::learn::train_end_to_end(ec, eh);
                iden::ckpt::put_mapper(arrays, res.mapper);
                iden::ckpt::put_demapper(arrays, res.demapper);
                iden::ckpt::put_hyper(arrays, res.hyper);
                arrays["f_soft"] = iden::ad::Tensor::row(res.f_soft);
                arrays["rho_logit"] = iden::ad::Tensor::scalar(res.rho_logit);
                if (!t_history.empty()) write_file(t_history, history_csv(res.history));
                if (res.diverged) std::cerr << "warning: training diverged; checkpoint holds the last stable state\n";
            } else {
                throw std::invalid_argument("unknown training mode " + t_mode);
            }
            iden::ckpt::save_arrays(ckpt_path, arrays);
        } else if (*adapt) {
            auto cfg = iden::mc::load_config(config_path);
            if (adapt->count("--seed")) cfg.seed = seed;
            const auto hyper = iden::ckpt::get_hyper(iden::ckpt::load_arrays(a_hyper));
            const auto flat = iden::ckpt::get_flat(iden::ckpt::load_arrays(a_flat));
            const auto cells = iden::mc::adaptability_matrix(cfg, hyper, flat, a_ts, workers);
            write_file(out_path, iden::mc::adapt_csv(cells));
        } else if (*count) {
            iden::mc::DecoderKind kind;
            if (k_kind == "bp") kind = iden::mc::DecoderKind::Bp;
            else if (k_kind == "flat-bp") kind = iden::mc::DecoderKind::FlatBp;
            else if (k_kind == "hyper-bp") kind = iden::mc::DecoderKind::HyperBp;
            else throw std::invalid_argument("unknown decoder kind " + k_kind);
            const auto c = iden::mc::count_ops(kind, k_n, k_t, k_kh, k_l);
            std::cout << "decoder=" << k_kind << " N=" << k_n << " T=" << k_t
                      << " additions=" << c.additions << " multiplications=" << c.multiplications
                      << " memory=" << c.memory_slots << '\n';
        } else if (*fit) {
            std::vector<std::pair<double, double>> samples;
            if (!f_samples.empty()) {
                const auto curve = iden::mc::load_curve_csv(f_samples);
                for (const auto& [x, y] : curve) samples.emplace_back(x, y);
            } else {
                iden::phy::EhParams params{f_psat, f_a, f_b};
                for (int i = 0; i < f_count; ++i) {
                    const double p = f_range * i / (f_count - 1);
                    samples.emplace_back(p, iden::phy::eh_reference(p, params));
                }
            }
            iden::phy::EhFitReport rep;
            const auto net = iden::phy::eh_fit(samples, f_tol, seed, 16, 3, &rep);
            iden::ckpt::ArrayMap arrays;
            iden::ckpt::put_eh(arrays, net);
            iden::ckpt::save_arrays(ckpt_path, arrays);
            std::cout << "fit ok: max_abs_err=" << rep.max_abs_err << " mW rms=" << rep.rms_err
                      << " mW epochs=" << rep.epochs << '\n';
        } else if (*expc) {
            iden::modem::ConstellationSet set;
            if (e_ckpt.empty()) {
                set = iden::modem::qam_constellation(e_m, e_ptr);
            } else {
                auto mapper = iden::ckpt::get_mapper(iden::ckpt::load_arrays(e_ckpt));
                set = mapper.forward(std::pow(10.0, e_gamma_db / 10.0));
            }
            write_file(out_path, iden::modem::constellation_csv(set));
        } else if (*shift) {
            iden::mc::Curve curve;
            if (!curve_path.empty()) curve = iden::mc::load_curve_csv(curve_path);
            else curve = iden::mc::normal_approx_curve(s_n, s_k, s_lo, s_hi, s_step);
            write_file(out_path, iden::mc::curve_csv(iden::mc::shift_bound(curve, s_rho)));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
