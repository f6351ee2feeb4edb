#include "iden/serialize.hpp"

namespace iden::ckpt {

using ad::Tensor;

void put_mlp(ArrayMap& m, const std::string& prefix, const nn::Mlp& net) {
    Tensor acts(1, (int)net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const auto& d = net.layers[l];
        Tensor w(d.out, d.in);
        w.v = d.w;
        m[prefix + ".w" + std::to_string(l)] = std::move(w);
        if (!d.b.empty()) {
            Tensor b(1, d.out);
            b.v = d.b;
            m[prefix + ".b" + std::to_string(l)] = std::move(b);
        }
        acts.v[l] = (double)(int)d.act;
    }
    m[prefix + ".acts"] = std::move(acts);
}

nn::Mlp get_mlp(const ArrayMap& m, const std::string& prefix) {
    const auto it = m.find(prefix + ".acts");
    if (it == m.end()) throw std::runtime_error("checkpoint: missing " + prefix + ".acts");
    nn::Mlp net;
    for (int l = 0; l < it->second.size(); ++l) {
        nn::Dense d;
        d.act = (nn::Act)(int)it->second.v[l];
        const auto& w = m.at(prefix + ".w" + std::to_string(l));
        d.out = w.rows;
        d.in = w.cols;
        d.w = w.v;
        const auto bit = m.find(prefix + ".b" + std::to_string(l));
        if (bit != m.end()) d.b = bit->second.v;
        net.layers.push_back(std::move(d));
    }
    return net;
}

void put_mapper(ArrayMap& m, const modem::MapperNet& net) {
    put_mlp(m, "mapper", net.net);
    Tensor meta(1, 4);
    meta.v = {(double)net.M, net.p_tr, net.snr_mean_db, net.snr_std_db};
    m["mapper.meta"] = std::move(meta);
}

modem::MapperNet get_mapper(const ArrayMap& m) {
    modem::MapperNet net;
    net.net = get_mlp(m, "mapper");
    const auto& meta = m.at("mapper.meta");
    net.M = (int)meta.v[0];
    net.p_tr = meta.v[1];
    net.snr_mean_db = meta.v[2];
    net.snr_std_db = meta.v[3];
    return net;
}

void put_demapper(ArrayMap& m, const modem::DemapperNet& net) {
    put_mlp(m, "demapper", net.net);
    Tensor meta(1, 3);
    meta.v = {(double)net.M, net.snr_mean_db, net.snr_std_db};
    m["demapper.meta"] = std::move(meta);
}

modem::DemapperNet get_demapper(const ArrayMap& m) {
    modem::DemapperNet net;
    net.net = get_mlp(m, "demapper");
    const auto& meta = m.at("demapper.meta");
    net.M = (int)meta.v[0];
    net.snr_mean_db = meta.v[1];
    net.snr_std_db = meta.v[2];
    return net;
}

void put_hyper(ArrayMap& m, const dec::HyperNet& net) {
    Tensor meta(1, 5);
    meta.v = {(double)net.n, (double)net.N, (double)net.k_h, (double)net.L, (double)net.T};
    m["hyper.meta"] = std::move(meta);
    for (size_t l = 0; l < net.W.size(); ++l) {
        int out, in;
        if (l == 0) {
            out = net.k_h;
            in = 1;
        } else if ((int)l < net.L) {
            out = net.k_h;
            in = net.k_h;
        } else {
            out = net.raw_size();
            in = net.k_h;
        }
        Tensor w(out, in);
        w.v = net.W[l];
        m["hyper.w" + std::to_string(l)] = std::move(w);
    }
}

dec::HyperNet get_hyper(const ArrayMap& m) {
    const auto& meta = m.at("hyper.meta");
    dec::HyperNet net;
    net.n = (int)meta.v[0];
    net.N = (int)meta.v[1];
    net.k_h = (int)meta.v[2];
    net.L = (int)meta.v[3];
    net.T = (int)meta.v[4];
    for (int l = 0; l <= net.L; ++l) net.W.push_back(m.at("hyper.w" + std::to_string(l)).v);
    return net;
}

void put_flat(ArrayMap& m, const dec::IterWeights& w) {
    if (w.per_iter.empty()) throw std::invalid_argument("put_flat: empty weight list");
    Tensor meta(1, 3);
    meta.v = {(double)w.per_iter[0].n, (double)w.per_iter[0].N, (double)w.per_iter.size()};
    m["flat.meta"] = std::move(meta);
    for (size_t t = 0; t < w.per_iter.size(); ++t) {
        Tensor a(w.per_iter[t].n, w.per_iter[t].N), b(w.per_iter[t].n, w.per_iter[t].N);
        a.v = w.per_iter[t].alpha;
        b.v = w.per_iter[t].beta;
        m["flat.alpha" + std::to_string(t)] = std::move(a);
        m["flat.beta" + std::to_string(t)] = std::move(b);
    }
}

dec::IterWeights get_flat(const ArrayMap& m) {
    const auto& meta = m.at("flat.meta");
    dec::IterWeights w;
    const int T = (int)meta.v[2];
    for (int t = 0; t < T; ++t) {
        dec::BpWeights set;
        set.n = (int)meta.v[0];
        set.N = (int)meta.v[1];
        set.alpha = m.at("flat.alpha" + std::to_string(t)).v;
        set.beta = m.at("flat.beta" + std::to_string(t)).v;
        w.per_iter.push_back(std::move(set));
    }
    return w;
}

void put_eh(ArrayMap& m, const phy::EhNet& net) {
    put_mlp(m, "eh", net.net);
    Tensor meta(1, 4);
    meta.v = {net.in_scale, net.out_scale, net.fit_min, net.fit_max};
    m["eh.meta"] = std::move(meta);
}

phy::EhNet get_eh(const ArrayMap& m) {
    phy::EhNet net;
    net.net = get_mlp(m, "eh");
    const auto& meta = m.at("eh.meta");
    net.in_scale = meta.v[0];
    net.out_scale = meta.v[1];
    net.fit_min = meta.v[2];
    net.fit_max = meta.v[3];
    return net;
}

} // namespace iden::ckpt
