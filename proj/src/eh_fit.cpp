#include "iden/phy.hpp"
#include "iden/train.hpp"

#include <algorithm>
#include <cmath>

namespace iden::phy {

using ad::Tape;
using ad::Tensor;
using ad::Var;

EhNet eh_fit(const std::vector<std::pair<double, double>>& samples, double tolerance_mw,
             std::uint64_t seed, int hidden, int hidden_layers, EhFitReport* report) {
    if (samples.size() < 1000)
        throw std::invalid_argument("eh_fit: need at least 1000 samples spanning the operating range");

    EhNet net;
    net.fit_min = samples.front().first;
    net.fit_max = samples.front().first;
    double out_max = 0.0;
    for (const auto& [x, y] : samples) {
        net.fit_min = std::min(net.fit_min, x);
        net.fit_max = std::max(net.fit_max, x);
        out_max = std::max(out_max, std::fabs(y));
    }
    if (net.fit_min < 0.0) throw std::invalid_argument("eh_fit: negative input power in samples");
    net.in_scale = std::max(net.fit_max, 1e-9);
    net.out_scale = std::max(out_max * 1.25, 1e-9); // keep targets inside the tanh range

    std::vector<int> widths{1};
    std::vector<nn::Act> acts;
    for (int i = 0; i < hidden_layers; ++i) {
        widths.push_back(hidden);
        acts.push_back(nn::Act::Tanh);
    }
    widths.push_back(1);
    acts.push_back(nn::Act::Tanh); // tanh output layer as well
    net.net = nn::Mlp::make(widths, acts, /*bias=*/true, seed);

    const int S = (int)samples.size();
    Tensor xs(S, 1), ys(S, 1);
    for (int i = 0; i < S; ++i) {
        xs.v[i] = samples[i].first / net.in_scale;
        ys.v[i] = samples[i].second / net.out_scale;
    }

    learn::ParamStore store;
    std::vector<nn::Act> layer_acts;
    {
        Tape tp0;
        learn::TapeMlp t0 = learn::TapeMlp::from_mlp(tp0, net.net, true);
        for (size_t l = 0; l < t0.W.size(); ++l) {
            store.add("w" + std::to_string(l), tp0.val(t0.W[l]));
            store.add("b" + std::to_string(l), tp0.val(t0.b[l]));
            layer_acts.push_back(t0.acts[l]);
        }
    }
    learn::Adam opt;
    opt.lr = 0.02;

    auto write_back = [&]() {
        Tape tpf;
        learn::TapeMlp tm;
        for (size_t l = 0; l < layer_acts.size(); ++l) {
            tm.W.push_back(tpf.constant(store.find("w" + std::to_string(l))));
            tm.b.push_back(tpf.constant(store.find("b" + std::to_string(l))));
            tm.acts.push_back(layer_acts[l]);
        }
        tm.store_to(tpf, net.net);
    };

    auto max_abs_err = [&]() {
        double e = 0.0;
        for (const auto& [x, y] : samples) e = std::max(e, std::fabs(net.forward(x) - y));
        return e;
    };

    const int max_epochs = 6000;
    int epoch = 0;
    double best = 1e300;
    for (; epoch < max_epochs; ++epoch) {
        if (epoch == 2000) opt.lr = 0.005;
        if (epoch == 4000) opt.lr = 0.001;
        Tape tp;
        std::vector<Var> vars;
        learn::TapeMlp tnet;
        for (size_t l = 0; l < layer_acts.size(); ++l) {
            tnet.W.push_back(tp.param(store.find("w" + std::to_string(l))));
            tnet.b.push_back(tp.param(store.find("b" + std::to_string(l))));
            tnet.acts.push_back(layer_acts[l]);
            vars.push_back(tnet.W.back());
            vars.push_back(tnet.b.back());
        }
        Var pred = tnet.forward(tp, tp.constant(xs));
        Var err = tp.sub(pred, tp.constant(ys));
        Var loss = tp.mean_all(tp.mul(err, err));
        tp.backward(loss);
        std::vector<Tensor> grads;
        for (Var v : vars) grads.push_back(tp.grad(v));
        opt.step(store, grads);
        if ((epoch + 1) % 200 == 0) {
            write_back();
            best = max_abs_err();
            if (best < 0.5 * tolerance_mw) {
                ++epoch;
                break;
            }
        }
    }
    write_back();

    EhFitReport rep;
    rep.epochs = epoch;
    rep.max_abs_err = max_abs_err();
    double sq = 0.0;
    for (const auto& [x, y] : samples) {
        const double d = net.forward(x) - y;
        sq += d * d;
    }
    rep.rms_err = std::sqrt(sq / S);
    if (report) *report = rep;
    if (rep.max_abs_err > tolerance_mw)
        throw FitError("eh_fit: residual above tolerance (max abs err " +
                       std::to_string(rep.max_abs_err) + " mW, tolerance " +
                       std::to_string(tolerance_mw) + " mW, rms " + std::to_string(rep.rms_err) + " mW)");
    return net;
}

} // namespace iden::phy
