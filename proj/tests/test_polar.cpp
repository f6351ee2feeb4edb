#include "iden/polar.hpp"
#include "iden/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <doctest.h>

#include "de_oracle.hpp"

using namespace iden;
using namespace iden::polar;

TEST_CASE("encode: generator matrix on hand-expanded N=4 cases") {
    CHECK(encode({0, 0, 0, 0}) == BitVec{0, 0, 0, 0});
    CHECK(encode({0, 0, 0, 1}) == BitVec{1, 1, 1, 1}); // last row of F x F is all-ones
    CHECK(encode({1, 1, 0, 0}) == BitVec{0, 1, 0, 0}); // XOR of rows 0 and 1
}

TEST_CASE("encode: rejects non power-of-two lengths") {
    CHECK_THROWS_AS(encode(BitVec(6, 0)), std::invalid_argument);
}

TEST_CASE("encode: GF(2) linearity and involution on random vectors") {
    auto rng = make_rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 << (1 + (int)(rng() % 6)); // 2..64
        BitVec u(n), v(n), s(n);
        for (int i = 0; i < n; ++i) {
            u[i] = rng() & 1;
            v[i] = rng() & 1;
            s[i] = u[i] ^ v[i];
        }
        const BitVec cu = encode(u), cv = encode(v), cs = encode(s);
        for (int i = 0; i < n; ++i) CHECK(cs[i] == (cu[i] ^ cv[i]));
        CHECK(encode(cu) == u); // G * G = I over GF(2)
    }
}

TEST_CASE("place_bits: direct placement and error paths") {
    CHECK(place_bits({1, 1}, {0, 1, 0, 1}) == BitVec{0, 1, 0, 1});
    CHECK(place_bits({}, {0, 0, 0, 0}) == BitVec{0, 0, 0, 0});
    const BitVec b{1, 0, 1, 1};
    CHECK(place_bits(b, {1, 1, 1, 1}) == b);
    CHECK_THROWS_AS(place_bits({1}, {0, 1, 0, 1}), std::invalid_argument);
}

TEST_CASE("bnn_binarize: comparison rule and edge cases") {
    CHECK(bnn_binarize({0.9, 0.1}, {0.5, 0.5}) == Mask{1, 0});
    CHECK(bnn_binarize({0.5, 0.25}, {0.5, 0.25}) == Mask{0, 0}); // equality freezes
    CHECK(bnn_binarize({1.0, 1.0}, {0.3, 0.999}) == Mask{1, 1});
    CHECK_THROWS_AS(bnn_binarize({0.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("bnn_binarize: empirical info frequency matches f_pro") {
    auto rng = make_rng(21);
    const std::vector<double> f_pro{0.1, 0.35, 0.5, 0.8, 0.97};
    const int draws = 20000;
    std::vector<int> hits(f_pro.size(), 0);
    for (int d = 0; d < draws; ++d) {
        std::vector<double> p_u(f_pro.size());
        for (auto& x : p_u) x = uniform01(rng);
        const Mask m = bnn_binarize(f_pro, p_u);
        for (size_t i = 0; i < m.size(); ++i) hits[i] += m[i];
    }
    for (size_t i = 0; i < f_pro.size(); ++i) {
        const double p = f_pro[i];
        const double sigma = std::sqrt(p * (1.0 - p) / draws);
        CHECK(std::fabs((double)hits[i] / draws - p) < 3.0 * sigma + 1e-12);
    }
}

TEST_CASE("select_top_k: order statistics and tie rule") {
    CHECK(select_top_k({3, 1, 2, 0}, 2) == Mask{1, 0, 1, 0});
    CHECK(select_top_k({1, 1, 1, 1}, 2) == Mask{1, 1, 0, 0}); // ties to lower index
    CHECK(select_top_k({0.5, -2, 3, 7}, 4) == Mask{1, 1, 1, 1});
    CHECK_THROWS_AS(select_top_k({1, 2}, 3), std::invalid_argument);
    auto rng = make_rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> f(32);
        for (auto& x : f) x = uniform01(rng) * 10 - 5;
        const int k = (int)(rng() % 33);
        CHECK(count_info(select_top_k(f, k)) == k);
    }
}

TEST_CASE("rate_of: sigmoid average") {
    CHECK(rate_of(std::vector<double>(16, 0.0)) == doctest::Approx(0.5));
    CHECK(rate_of(std::vector<double>(8, 50.0)) == doctest::Approx(1.0).epsilon(1e-9));
    std::vector<double> f(16, 0.0);
    for (int i = 8; i < 16; ++i) f[i] = -40.0;
    CHECK(rate_of(f) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("construct_ga: N=2 picks the variable-node channel") {
    for (double snr : {-2.0, 0.0, 2.0, 5.0}) {
        CHECK(construct_ga(2, 1, snr) == Mask{0, 1});
    }
    CHECK(construct_ga(4, 4, 2.0) == Mask{1, 1, 1, 1});
}

TEST_CASE("construct_ga: N=8 ordering matches quantized density evolution for every K") {
    const double design = 2.0;
    const auto pe = de_oracle::channel_error_probs(8, design);
    std::vector<int> order(8);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pe[a] < pe[b]; });
    for (int k = 1; k <= 8; ++k) {
        Mask expect(8, 0);
        for (int i = 0; i < k; ++i) expect[order[i]] = 1;
        CHECK(construct_ga(8, k, design) == expect);
    }
}

TEST_CASE("construct_pw: beta-expansion weights") {
    // N=4 weights are [0, 1, beta, beta+1] with beta = 2^(1/4): K=1 -> index 3
    CHECK(construct_pw(4, 1) == Mask{0, 0, 0, 1});
    CHECK(construct_pw(2, 1) == Mask{0, 1});
    CHECK(construct_pw(8, 8) == Mask(8, 1));
    const auto w = pw_weights(4);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[1] == doctest::Approx(1.0));
    CHECK(w[2] == doctest::Approx(std::pow(2.0, 0.25)));
    CHECK(w[3] == doctest::Approx(1.0 + std::pow(2.0, 0.25)));
}

TEST_CASE("construct_5g: bundled universal sequence") {
    CHECK(construct_5g(64, 64) == Mask(64, 1));
    CHECK(construct_5g(64, 0) == Mask(64, 0));
    // single most reliable index below 64 per the bundled sequence
    const auto& seq = reliability_sequence_1024();
    int best = -1;
    for (auto it = seq.rbegin(); it != seq.rend(); ++it)
        if (*it < 64) {
            best = *it;
            break;
        }
    Mask expect(64, 0);
    expect[best] = 1;
    CHECK(construct_5g(64, 1) == expect);
    CHECK_THROWS_AS(construct_5g(2048, 10), std::invalid_argument);
}

TEST_CASE("construct_5g: table file and embedded table agree") {
    std::ifstream is(std::string(IDEN_SOURCE_DIR) + "/data/nr_polar_reliability_nmax1024.txt");
    REQUIRE(is.good());
    std::vector<int> file_seq;
    int v;
    while (is >> v) file_seq.push_back(v);
    CHECK(file_seq == reliability_sequence_1024());
    // permutation sanity
    std::vector<int> sorted = file_seq;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 1024; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("constructions agree on extreme rates") {
    for (int N : {8, 64}) {
        CHECK(count_info(construct_ga(N, N / 2, 2.0)) == N / 2);
        CHECK(count_info(construct_pw(N, N / 2)) == N / 2);
        CHECK(count_info(construct_5g(N, N / 2)) == N / 2);
    }
}
