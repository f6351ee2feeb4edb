#include "iden/modem.hpp"
#include "iden/rng.hpp"

#include <doctest.h>

using namespace iden;
using namespace iden::modem;

TEST_CASE("qam: 4-QAM points and power scaling") {
    const auto set = qam_constellation(4, 1.0);
    const double a = 1.0 / std::sqrt(2.0);
    for (int m = 0; m < 4; ++m) {
        CHECK(std::fabs(set.re[m]) == doctest::Approx(a));
        CHECK(std::fabs(set.im[m]) == doctest::Approx(a));
    }
    CHECK(set.mean_power() == doctest::Approx(1.0));
    const auto set2 = qam_constellation(4, 2.0);
    for (int m = 0; m < 4; ++m) {
        CHECK(set2.re[m] == doctest::Approx(set.re[m] * std::sqrt(2.0)));
        CHECK(set2.im[m] == doctest::Approx(set.im[m] * std::sqrt(2.0)));
    }
}

TEST_CASE("qam: 16-QAM normalization and minimum distance") {
    const auto set = qam_constellation(16, 1.0);
    CHECK(set.mean_power() == doctest::Approx(1.0));
    double dmin = 1e300;
    for (int a = 0; a < 16; ++a)
        for (int b = a + 1; b < 16; ++b) {
            const double dr = set.re[a] - set.re[b], di = set.im[a] - set.im[b];
            dmin = std::min(dmin, std::sqrt(dr * dr + di * di));
        }
    CHECK(dmin == doctest::Approx(2.0 / std::sqrt(10.0)));
    CHECK_THROWS_AS(qam_constellation(8, 1.0), std::invalid_argument);
}

TEST_CASE("qam: gray labeling means adjacent levels differ in one bit") {
    const auto set = qam_constellation(16, 1.0);
    for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b) {
            const double dr = set.re[a] - set.re[b], di = set.im[a] - set.im[b];
            if (std::fabs(std::sqrt(dr * dr + di * di) - 2.0 / std::sqrt(10.0)) < 1e-9) {
                int bits = a ^ b, cnt = 0;
                while (bits) {
                    cnt += bits & 1;
                    bits >>= 1;
                }
                CHECK(cnt == 1);
            }
        }
}

TEST_CASE("one_hot_map: big-endian grouping") {
    auto v = one_hot_map({0, 1}, 4);
    CHECK(v.indices == std::vector<int>{1});
    v = one_hot_map({1, 1}, 4);
    CHECK(v.indices == std::vector<int>{3});
    v = one_hot_map({1, 0, 0, 0}, 16);
    CHECK(v.indices == std::vector<int>{8});
    CHECK_THROWS_AS(one_hot_map({1, 0, 1}, 4), std::invalid_argument);
    // dense view: one 1 per column
    v = one_hot_map({0, 0, 0, 1, 1, 0, 1, 1}, 4);
    const auto d = v.dense();
    for (size_t col = 0; col < v.indices.size(); ++col) {
        int sum = 0;
        for (int row = 0; row < 4; ++row) sum += d[row * v.indices.size() + col];
        CHECK(sum == 1);
    }
}

TEST_CASE("modulate: selection semantics") {
    const auto set = qam_constellation(4, 1.0);
    OneHotBlock v;
    v.M = 4;
    v.indices = {0, 1, 2, 3};
    const auto x = modulate(v, set);
    for (int m = 0; m < 4; ++m) {
        CHECK(x[m].real() == set.re[m]);
        CHECK(x[m].imag() == set.im[m]);
    }
    v.indices = {0, 0, 0};
    const auto xc = modulate(v, set);
    CHECK(xc[0] == xc[1]);
    CHECK(xc[1] == xc[2]);
    auto rng = make_rng(3);
    v.indices.clear();
    for (int i = 0; i < 64; ++i) v.indices.push_back((int)(rng() % 4));
    for (const auto& s : modulate(v, set)) {
        bool member = false;
        for (int m = 0; m < 4; ++m)
            member = member || (s.real() == set.re[m] && s.imag() == set.im[m]);
        CHECK(member);
    }
}

TEST_CASE("mapper: normalization holds for arbitrary parameters") {
    auto rng = make_rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto mapper = MapperNet::make(4, 1.5, 32, 3, rng());
        const double gamma = std::pow(10.0, (uniform01(rng) * 20.0 - 5.0) / 10.0);
        const auto set = mapper.forward(gamma);
        CHECK(std::fabs(set.mean_power() - 1.5) / 1.5 < 1e-9);
        // determinism
        const auto set2 = mapper.forward(gamma);
        CHECK(set.re == set2.re);
        CHECK(set.im == set2.im);
    }
    auto mapper = MapperNet::make(4, 1.0, 32, 3, 2);
    CHECK_THROWS_AS(mapper.forward(0.0), std::invalid_argument);
}

TEST_CASE("mapper: degeneracy guard rejects coinciding points") {
    auto mapper = MapperNet::make(4, 1.0, 16, 2, 7);
    // zero the final layer weights and pin a nonzero bias: all points equal
    auto& last = mapper.net.layers.back();
    std::fill(last.w.begin(), last.w.end(), 0.0);
    std::fill(last.b.begin(), last.b.end(), 0.3);
    CHECK_THROWS_AS(mapper.forward(1.0), std::runtime_error);
    // all-zero output trips the origin guard instead
    std::fill(last.b.begin(), last.b.end(), 0.0);
    CHECK_THROWS_AS(mapper.forward(1.0), std::runtime_error);
}

TEST_CASE("exact_llr_demap: noise-free symbols give saturated correct signs") {
    const auto set = qam_constellation(4, 1.0);
    std::vector<cplx> y;
    for (int m = 0; m < 4; ++m) y.push_back(set.point(m));
    const auto llrs = exact_llr_demap(y, set, 1e-9, 1.0);
    REQUIRE(llrs.size() == 8);
    for (int m = 0; m < 4; ++m)
        for (int b = 0; b < 2; ++b) {
            const int bit = (m >> (1 - b)) & 1;
            CHECK(std::fabs(llrs[2 * m + b]) == doctest::Approx(kLlrMax));
            CHECK((llrs[2 * m + b] < 0 ? 1 : 0) == bit);
        }
}

TEST_CASE("exact_llr_demap: midpoint between two points zeroes that bit") {
    const auto set = qam_constellation(4, 1.0);
    // halfway between index 0 (bits 00) and index 1 (bits 01): second bit LLR = 0
    const cplx mid = 0.5 * (set.point(0) + set.point(1));
    const auto llrs = exact_llr_demap({mid}, set, 0.5, 1.0);
    CHECK(llrs[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(llrs[0] != doctest::Approx(0.0));
}

TEST_CASE("exact_llr_demap: matches an independent brute-force posterior") {
    const auto set = qam_constellation(4, 1.0);
    auto rng = make_rng(11);
    const double noise_var = 0.5, rho = 1.0;
    const cplx y(0.9 / std::sqrt(2.0), 0.8 / std::sqrt(2.0));
    std::vector<cplx> ys{y};
    for (int t = 0; t < 200; ++t) ys.emplace_back(gauss(rng, 1.0), gauss(rng, 1.0));
    const auto got = exact_llr_demap(ys, set, noise_var, rho);
    for (size_t s = 0; s < ys.size(); ++s) {
        for (int b = 0; b < 2; ++b) {
            long double s0 = 0.0L, s1 = 0.0L;
            for (int m = 0; m < 4; ++m) {
                const long double dr = ys[s].real() - std::sqrt(rho) * set.re[m];
                const long double di = ys[s].imag() - std::sqrt(rho) * set.im[m];
                const long double w = expl(-(dr * dr + di * di) / noise_var);
                if ((m >> (1 - b)) & 1) s1 += w;
                else s0 += w;
            }
            const double expect = clip((double)(logl(s0) - logl(s1)), -kLlrMax, kLlrMax);
            CHECK(std::fabs(got[2 * s + b] - expect) < 1e-9);
        }
    }
    CHECK_THROWS_AS(exact_llr_demap(ys, set, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("round trip: map, modulate, demap at vanishing noise recovers the bits") {
    auto rng = make_rng(13);
    for (int M : {4, 16, 64}) {
        const auto set = qam_constellation(M, 2.0);
        const int bps = set.bits_per_symbol();
        BitVec bits(4 * 64 / 4 * bps % (64 * bps) + 64);
        bits.resize((bits.size() / bps) * bps);
        for (auto& b : bits) b = rng() & 1;
        const auto v = one_hot_map(bits, M);
        const auto x = modulate(v, set);
        const auto llrs = exact_llr_demap(x, set, 1e-6, 1.0);
        REQUIRE(llrs.size() == bits.size());
        for (size_t i = 0; i < bits.size(); ++i) CHECK((llrs[i] < 0 ? 1 : 0) == bits[i]);
    }
}

TEST_CASE("demapper: shapes and zero-weight net") {
    auto net = DemapperNet::make(4, 16, 2, 3);
    for (auto& l : net.net.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    std::vector<cplx> y(7, cplx(0.3, -0.2));
    const auto llrs = net.forward(y, 2.0);
    CHECK(llrs.size() == 14); // 2 per symbol at M=4
    for (double v : llrs) CHECK(v == 0.0); // maximum uncertainty
}

TEST_CASE("csi demap: equals plain demap on a unit channel") {
    const auto set = qam_constellation(4, 1.0);
    auto rng = make_rng(17);
    std::vector<cplx> y, h;
    for (int i = 0; i < 50; ++i) {
        y.emplace_back(gauss(rng, 1.0), gauss(rng, 1.0));
        h.emplace_back(1.0, 0.0);
    }
    CHECK(exact_llr_demap_csi(y, set, 0.5, 0.8, h) == exact_llr_demap(y, set, 0.5, 0.8));
}

TEST_CASE("constellation csv export") {
    const auto set = qam_constellation(4, 1.0);
    const auto text = constellation_csv(set);
    CHECK(text.find("# idenlink csv v1 constellation") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6); // header + columns + 4 rows
}
