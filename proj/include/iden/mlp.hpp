#pragma once

#include "iden/common.hpp"
#include "iden/rng.hpp"

namespace iden::nn {

enum class Act { Linear, Relu, Tanh, Sigmoid };

struct Dense {
    int in = 0, out = 0;
    std::vector<double> w; // row-major out x in
    std::vector<double> b; // out (empty = no bias)
    Act act = Act::Linear;
};

// Small dense network used for inference by the mapper, demapper and the
// harvester surrogate. Training happens on the tape; trained values are
// copied back into this container.
struct Mlp {
    std::vector<Dense> layers;

    static Mlp make(const std::vector<int>& widths, const std::vector<Act>& acts, bool bias,
                    std::uint64_t seed);

    std::vector<double> forward(const std::vector<double>& x) const;
    int input_size() const { return layers.front().in; }
    int output_size() const { return layers.back().out; }
};

inline Mlp Mlp::make(const std::vector<int>& widths, const std::vector<Act>& acts, bool bias,
                     std::uint64_t seed) {
    if (widths.size() < 2 || acts.size() != widths.size() - 1)
        throw std::invalid_argument("Mlp::make: widths/acts mismatch");
    Mlp net;
    auto rng = make_rng(seed, 0x4d4c50);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        Dense d;
        d.in = widths[l];
        d.out = widths[l + 1];
        d.act = acts[l];
        d.w.resize((size_t)d.out * d.in);
        const double lim = std::sqrt(6.0 / (d.in + d.out));
        for (auto& x : d.w) x = (uniform01(rng) * 2.0 - 1.0) * lim;
        if (bias) d.b.assign(d.out, 0.0);
        net.layers.push_back(std::move(d));
    }
    return net;
}

inline std::vector<double> Mlp::forward(const std::vector<double>& x) const {
    std::vector<double> cur = x;
    for (const auto& d : layers) {
        if ((int)cur.size() != d.in) throw std::invalid_argument("Mlp::forward: input size mismatch");
        std::vector<double> next(d.out, 0.0);
        for (int o = 0; o < d.out; ++o) {
            double acc = d.b.empty() ? 0.0 : d.b[o];
            const double* row = d.w.data() + (size_t)o * d.in;
            for (int i = 0; i < d.in; ++i) acc += row[i] * cur[i];
            switch (d.act) {
                case Act::Linear: next[o] = acc; break;
                case Act::Relu: next[o] = acc > 0.0 ? acc : 0.0; break;
                case Act::Tanh: next[o] = std::tanh(acc); break;
                case Act::Sigmoid: next[o] = sigmoid(acc); break;
            }
        }
        cur.swap(next);
    }
    return cur;
}

} // namespace iden::nn
