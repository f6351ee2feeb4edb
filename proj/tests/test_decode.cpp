#include "iden/decode.hpp"
#include "iden/polar.hpp"
#include "iden/rng.hpp"

#include <doctest.h>

#include "reference_bp.hpp"

using namespace iden;
using namespace iden::dec;

namespace {

std::vector<double> random_llrs(std::mt19937_64& rng, int n, double spread = 4.0) {
    std::vector<double> llrs(n);
    for (auto& x : llrs) x = gauss(rng, spread);
    return llrs;
}

Mask random_mask(std::mt19937_64& rng, int n, int k) {
    std::vector<double> f(n);
    for (auto& x : f) x = uniform01(rng);
    return polar::select_top_k(f, k);
}

} // namespace

TEST_CASE("g_minsum: direct evaluations") {
    CHECK(g_minsum(2, -3) == doctest::Approx(-2));
    CHECK(g_minsum(0.5, 10) == doctest::Approx(0.5));
    CHECK(g_minsum(-7, kLlrMax) == doctest::Approx(-7));
    CHECK(g_minsum(0.0, -5.0) == doctest::Approx(-0.0)); // sign(0) treated as +1
}

TEST_CASE("bp_init: boundary layers") {
    const int N = 8;
    std::vector<double> llrs(N, 0.0);
    auto st = bp_init(llrs, Mask(N, 0));
    for (int j = 0; j < N; ++j) CHECK(st.r(0, j) == kLlrMax);
    st = bp_init(llrs, Mask(N, 1));
    for (int j = 0; j < N; ++j) CHECK(st.r(0, j) == 0.0);
    for (int j = 0; j < N; ++j) CHECK(st.l(st.n, j) == 0.0);
    llrs.assign(N, 100.0); // beyond the clip bound
    st = bp_init(llrs, Mask(N, 1));
    for (int j = 0; j < N; ++j) CHECK(st.l(st.n, j) == kLlrMax);
    CHECK_THROWS_AS(bp_init(std::vector<double>(4, 0.0), Mask(8, 1)), std::invalid_argument);
}

TEST_CASE("bp_decode: N=2 hand trace") {
    // One PE, T=1, frozen upper / info lower, channel LLRs [+2, +3]:
    // R pass: R(1,0) = g(30, 3) = 3, R(1,1) = g(30, 2) + 0 = 2
    // L pass: L(0,0) = g(2, 3) = 2,  L(0,1) = g(30, 2) + 3 = 5
    // decision at the info position: 0 + 5 > 0 -> bit 0
    const auto res = bp_decode_plain({2.0, 3.0}, {0, 1}, 1);
    REQUIRE(res.info_bits.size() == 1);
    CHECK(res.info_bits[0] == 0);
    CHECK(res.soft[1] == doctest::Approx(sigmoid(5.0)));
    CHECK(res.soft[0] == doctest::Approx(sigmoid(kLlrMax + 2.0 > kLlrMax ? kLlrMax + 2 : 0)).epsilon(1));
}

TEST_CASE("bp_decode: noiseless all-zero codeword decodes clean") {
    const int N = 16;
    auto rng = make_rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Mask mask = random_mask(rng, N, 8);
        const std::vector<double> llrs(N, 20.0); // strong zeros
        for (int T : {1, 3, 10}) {
            const auto res = bp_decode_plain(llrs, mask, T);
            for (auto b : res.info_bits) CHECK(b == 0);
        }
    }
}

TEST_CASE("bp_decode: equals the independent reference implementation") {
    auto rng = make_rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const int N = 1 << (1 + (int)(rng() % 6));
        const Mask mask = random_mask(rng, N, N / 2);
        const auto llrs = random_llrs(rng, N);
        const int T = 1 + (int)(rng() % 8);
        const auto kernel = bp_decode_plain(llrs, mask, T);
        const auto ref = ref_bp::decode(llrs, mask, T);
        CHECK(kernel.info_bits == ref);
    }
}

TEST_CASE("bp_decode: weighted kernel equals weighted reference") {
    auto rng = make_rng(29);
    const int N = 32, n = 5;
    for (int trial = 0; trial < 50; ++trial) {
        const Mask mask = random_mask(rng, N, 16);
        const auto llrs = random_llrs(rng, N);
        BpWeights w = BpWeights::ones(n, N);
        std::vector<std::vector<double>> alpha(n, std::vector<double>(N)),
            beta(n, std::vector<double>(N));
        for (int s = 0; s < n; ++s)
            for (int j = 0; j < N; ++j) {
                alpha[s][j] = 0.5 + uniform01(rng);
                beta[s][j] = 0.5 + uniform01(rng);
                w.alpha[s * N + j] = alpha[s][j];
                w.beta[s * N + j] = beta[s][j];
            }
        const auto kernel = bp_decode(llrs, mask, 4, w);
        const auto ref = ref_bp::decode(llrs, mask, 4, alpha, beta);
        CHECK(kernel.info_bits == ref);
    }
}

TEST_CASE("bp_decode: all messages clipped after every update") {
    auto rng = make_rng(31);
    const int N = 64;
    const Mask mask = random_mask(rng, N, 32);
    auto llrs = random_llrs(rng, N, 40.0);
    BpState st = bp_init(llrs, mask);
    // drive the state through the public API and inspect the lattice bounds
    const auto res = bp_decode_plain(llrs, mask, 8);
    for (double s : res.soft) {
        CHECK(s >= sigmoid(-2 * kLlrMax));
        CHECK(s <= sigmoid(2 * kLlrMax));
    }
    for (double v : st.L) CHECK(std::fabs(v) <= kLlrMax);
    for (double v : st.R) CHECK(std::fabs(v) <= kLlrMax);
}

TEST_CASE("bp_decode: T < 1 is invalid") {
    CHECK_THROWS_AS(bp_decode_plain({1.0, 1.0}, {1, 1}, 0), std::invalid_argument);
}

TEST_CASE("hypernet: determinism, zero net, range checks") {
    auto net = HyperNet::make(64, 8, 3, 6, 42);
    const auto w1 = net.forward(3);
    const auto w2 = net.forward(3);
    CHECK(w1.alpha == w2.alpha);
    CHECK(w1.beta == w2.beta);
    for (auto& w : net.W)
        for (auto& x : w) x = 0.0;
    const auto w0 = net.forward(1);
    for (double a : w0.alpha) CHECK(a == 1.0); // exp(0): plain min-sum
    for (double b : w0.beta) CHECK(b == 1.0);
    CHECK_THROWS_AS(net.forward(0), std::invalid_argument);
    CHECK_THROWS_AS(net.forward(7), std::invalid_argument);
}

TEST_CASE("hypernet: distinct weight sets per iteration after random init") {
    auto net = HyperNet::make(64, 8, 3, 6, 7);
    std::vector<BpWeights> sets;
    for (int t = 1; t <= 6; ++t) sets.push_back(net.forward(t));
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) CHECK(sets[a].alpha != sets[b].alpha);
}

TEST_CASE("hyper_bp_decode: identity-emitting hypernet reduces to plain BP") {
    auto net = HyperNet::make(64, 8, 3, 6, 1);
    for (auto& w : net.W)
        for (auto& x : w) x = 0.0;
    auto rng = make_rng(37);
    const Mask mask = polar::construct_ga(64, 32, 2.0);
    const auto ones = BpWeights::ones(6, 64);
    for (int trial = 0; trial < 500; ++trial) {
        const auto llrs = random_llrs(rng, 64);
        const auto a = hyper_bp_decode(llrs, mask, 6, net);
        const auto b = bp_decode(llrs, mask, 6, ones);
        const auto c = bp_decode_plain(llrs, mask, 6);
        CHECK(a.info_bits == b.info_bits);
        CHECK(b.info_bits == c.info_bits);
        CHECK(a.soft == b.soft);
        CHECK(b.soft == c.soft);
    }
}

TEST_CASE("hyper_bp_decode: T_test below the training horizon is valid") {
    auto net = HyperNet::make(16, 8, 3, 6, 9);
    auto rng = make_rng(41);
    const Mask mask = polar::construct_ga(16, 8, 2.0);
    const auto llrs = random_llrs(rng, 16);
    CHECK_NOTHROW(hyper_bp_decode(llrs, mask, 3, net));
    CHECK_THROWS_AS(hyper_bp_decode(llrs, mask, 7, net), std::invalid_argument);
}

TEST_CASE("bp sign symmetry: negated LLRs decode to the complementary codeword") {
    // Negating every channel LLR maps the problem onto the coset of the
    // all-ones codeword: the re-encoded codeword estimate flips in every
    // position (in the u domain only the last index flips, since the all-ones
    // codeword is the image of e_{N-1}).
    auto rng = make_rng(43);
    const int N = 32;
    const Mask mask(N, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto llrs = random_llrs(rng, N, 2.0);
        auto neg = llrs;
        for (auto& x : neg) x = -x;
        const auto a = bp_decode_plain(llrs, mask, 3);
        const auto b = bp_decode_plain(neg, mask, 3);
        const BitVec ca = polar::encode(a.u_hard);
        const BitVec cb = polar::encode(b.u_hard);
        for (int j = 0; j < N; ++j) CHECK(ca[j] == (1 - cb[j]));
        for (int j = 0; j < N - 1; ++j) CHECK(a.u_hard[j] == b.u_hard[j]);
        CHECK(a.u_hard[N - 1] == (1 - b.u_hard[N - 1]));
    }
}

TEST_CASE("weight containers: footprint independent of T for the generator route") {
    OpCounters c3, c6;
    auto net = HyperNet::make(64, 8, 3, 6, 2);
    auto rng = make_rng(47);
    const Mask mask = polar::construct_ga(64, 32, 2.0);
    const auto llrs = random_llrs(rng, 64);
    hyper_bp_decode(llrs, mask, 3, net, &c3);
    hyper_bp_decode(llrs, mask, 6, net, &c6);
    CHECK(c3.memory_slots == c6.memory_slots); // shared buffers, reused per iteration
    // the per-iteration container grows linearly instead
    IterWeights w3, w6;
    for (int t = 0; t < 3; ++t) w3.per_iter.push_back(BpWeights::ones(6, 64));
    for (int t = 0; t < 6; ++t) w6.per_iter.push_back(BpWeights::ones(6, 64));
    OpCounters f3, f6;
    bp_decode_iterweights(llrs, mask, 3, w3, &f3);
    bp_decode_iterweights(llrs, mask, 6, w6, &f6);
    CHECK(f6.memory_slots == 2 * f3.memory_slots);
}

TEST_CASE("sc_decode: hand traces and noiseless decode") {
    // N=2, all info, llrs [+2,+3]: f = +2 -> u0=0; g = 3+2 = +5 -> u1=0
    CHECK(sc_decode({2.0, 3.0}, {1, 1}).u_hard == BitVec{0, 0});
    // N=2, llrs [-2,+3]: f = -2 -> u0=1; g = 3-(-2) = +5 -> u1=0 (ML agrees below)
    CHECK(sc_decode({-2.0, 3.0}, {1, 1}).u_hard == BitVec{1, 0});
    auto rng = make_rng(53);
    const Mask mask = polar::construct_ga(32, 16, 2.0);
    const std::vector<double> llrs(32, 15.0);
    const auto res = sc_decode(llrs, mask);
    for (auto b : res.info_bits) CHECK(b == 0);
}

namespace {

// Exhaustive maximum-likelihood oracle under the correlation metric.
BitVec ml_oracle(const std::vector<double>& llrs, const Mask& mask) {
    const int N = (int)mask.size();
    const int K = count_info(mask);
    double best = -1e300;
    BitVec best_u;
    for (int msg = 0; msg < (1 << K); ++msg) {
        BitVec b(K);
        for (int i = 0; i < K; ++i) b[i] = (msg >> i) & 1;
        const BitVec u = polar::place_bits(b, mask);
        const BitVec c = polar::encode(u);
        double corr = 0.0;
        for (int j = 0; j < N; ++j) corr += (c[j] ? -1.0 : 1.0) * llrs[j];
        if (corr > best) {
            best = corr;
            best_u = u;
        }
    }
    return best_u;
}

} // namespace

TEST_CASE("sc_decode: N=2 agrees with exhaustive ML") {
    auto rng = make_rng(59);
    for (int trial = 0; trial < 500; ++trial) {
        const auto llrs = random_llrs(rng, 2);
        CHECK(sc_decode(llrs, {1, 1}).u_hard == ml_oracle(llrs, {1, 1}));
    }
}

TEST_CASE("scl_decode: list size 1 is bit-exact SC") {
    auto rng = make_rng(61);
    for (int trial = 0; trial < 400; ++trial) {
        const int N = 1 << (1 + (int)(rng() % 6));
        const Mask mask = random_mask(rng, N, N / 2);
        const auto llrs = random_llrs(rng, N);
        CHECK(scl_decode(llrs, mask, 1).u_hard == sc_decode(llrs, mask).u_hard);
    }
}

TEST_CASE("scl_decode: full list at N=4 equals exhaustive ML on every frame") {
    auto rng = make_rng(67);
    const Mask mask(4, 1);
    for (int trial = 0; trial < 1200; ++trial) {
        const auto llrs = random_llrs(rng, 4, 2.0);
        CHECK(scl_decode(llrs, mask, 16).u_hard == ml_oracle(llrs, mask));
    }
}

TEST_CASE("scl_decode: paired-noise dominance over SC at N=4") {
    auto rng = make_rng(71);
    const Mask mask = polar::construct_ga(4, 2, 2.0);
    int sc_blocks = 0, scl_blocks = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        BitVec b{(std::uint8_t)(rng() & 1), (std::uint8_t)(rng() & 1)};
        const BitVec c = polar::encode(polar::place_bits(b, mask));
        std::vector<double> llrs(4);
        for (int j = 0; j < 4; ++j) llrs[j] = (c[j] ? -1.0 : 1.0) * 2.0 + gauss(rng, 1.6);
        const auto sc = sc_decode(llrs, mask).info_bits;
        const auto scl = scl_decode(llrs, mask, 2).info_bits;
        sc_blocks += sc != b;
        scl_blocks += scl != b;
    }
    CHECK(scl_blocks <= sc_blocks);
    CHECK(sc_blocks > 50); // the comparison is exercised, not vacuous
}

TEST_CASE("scl_decode: invalid list size") {
    CHECK_THROWS_AS(scl_decode({1.0, 1.0}, {1, 1}, 0), std::invalid_argument);
}

TEST_CASE("sc/scl: exact boxplus check update option") {
    auto rng = make_rng(79);
    const Mask mask = polar::construct_ga(16, 8, 2.0);
    const std::vector<double> clean(16, 12.0);
    ScOptions exact{true};
    for (auto b : sc_decode(clean, mask, exact).info_bits) CHECK(b == 0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto llrs = random_llrs(rng, 16);
        CHECK(scl_decode(llrs, mask, 1, exact).u_hard == sc_decode(llrs, mask, exact).u_hard);
    }
    // the two check updates agree in sign, differ in magnitude
    CHECK(std::fabs(2.0 * std::atanh(std::tanh(1.0) * std::tanh(1.5))) < g_minsum(2.0, 3.0));
}

TEST_CASE("instrumented counters: plain BP counts additions only") {
    auto rng = make_rng(73);
    const Mask mask = polar::construct_ga(64, 32, 2.0);
    const auto llrs = random_llrs(rng, 64);
    OpCounters c;
    bp_decode_plain(llrs, mask, 50, &c);
    CHECK(c.additions == 2ull * 50 * 64 * 6);
    CHECK(c.multiplications == 0);
    CHECK(c.memory_slots == 0);
}
