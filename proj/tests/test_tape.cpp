#include "iden/tape.hpp"
#include "iden/rng.hpp"
#include "iden/train.hpp"

#include <doctest.h>

#include <functional>

using namespace iden;
using namespace iden::ad;

namespace {

Tensor random_tensor(std::mt19937_64& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
    Tensor t(r, c);
    for (auto& x : t.v) x = lo + (hi - lo) * uniform01(rng);
    return t;
}

// Central finite differences on a scalar-valued graph builder. The builder is
// called with the (possibly perturbed) parameter tensors and must return the
// scalar root after registering the params in order.
double max_rel_fd_error(const std::vector<Tensor>& params,
                        const std::function<Var(Tape&, std::vector<Var>&)>& build,
                        double step = 1e-4) {
    Tape tp;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tp.param(p));
    std::vector<Var> passed = vars;
    Var root = build(tp, passed);
    tp.backward(root);
    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor* g = tp.has_grad(vars[pi]) ? &tp.grad(vars[pi]) : nullptr;
        for (int i = 0; i < params[pi].size(); ++i) {
            auto eval = [&](double delta) {
                std::vector<Tensor> shifted = params;
                shifted[pi].v[i] += delta;
                Tape t2;
                std::vector<Var> vs;
                for (const auto& p : shifted) vs.push_back(t2.param(p));
                std::vector<Var> passed2 = vs;
                return t2.val(build(t2, passed2)).v[0];
            };
            const double fd = (eval(step) - eval(-step)) / (2.0 * step);
            const double an = g ? g->v[i] : 0.0;
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
            worst = std::max(worst, std::fabs(fd - an) / denom);
        }
    }
    return worst;
}

} // namespace

TEST_CASE("tape: product rule example") {
    Tape tp;
    Var x = tp.param(Tensor::scalar(3.0));
    Var y = tp.param(Tensor::scalar(4.0));
    Var z = tp.mul(x, y);
    tp.backward(z);
    CHECK(tp.grad(x).v[0] == doctest::Approx(4.0));
    CHECK(tp.grad(y).v[0] == doctest::Approx(3.0));
}

TEST_CASE("tape: finite differences on every primitive") {
    auto rng = make_rng(101);
    const double tol = 1e-4;

    SUBCASE("add/sub/mul/div with broadcasts") {
        for (int trial = 0; trial < 12; ++trial) {
            auto a = random_tensor(rng, 3, 4);
            auto b = random_tensor(rng, 3, 4, 0.5, 2.0);
            auto brow = random_tensor(rng, 1, 4, 0.5, 2.0);
            auto bscalar = random_tensor(rng, 1, 1, 0.5, 2.0);
            CHECK(max_rel_fd_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
                  }) < tol);
            CHECK(max_rel_fd_error({a, brow}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.div(v[0], v[1]));
                  }) < tol);
            CHECK(max_rel_fd_error({a, bscalar}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.mul(v[0], v[1]));
                  }) < tol);
        }
    }

    SUBCASE("matmul") {
        for (int trial = 0; trial < 8; ++trial) {
            auto a = random_tensor(rng, 3, 5);
            auto w = random_tensor(rng, 5, 2);
            CHECK(max_rel_fd_error({a, w}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.matmul(v[0], v[1]));
                  }) < tol);
        }
    }

    SUBCASE("activations and pointwise maps") {
        for (int trial = 0; trial < 8; ++trial) {
            auto a = random_tensor(rng, 2, 6, -1.8, 1.8);
            // keep away from the relu kink
            for (auto& x : a.v)
                if (std::fabs(x) < 0.05) x += 0.1;
            CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.relu(v[0]));
                  }) < tol);
            CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.tanh_(v[0]));
                  }) < tol);
            CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.sigmoid_(v[0]));
                  }) < tol);
            CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.exp_(v[0]));
                  }) < tol);
            auto pos = random_tensor(rng, 2, 5, 0.3, 3.0);
            CHECK(max_rel_fd_error({pos}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.log_(v[0]));
                  }) < tol);
            CHECK(max_rel_fd_error({pos}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.sqrt_(v[0]));
                  }) < tol);
            CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                      return t.mean_all(t.scale(t.add_scalar(v[0], 0.7), -1.3));
                  }) < tol);
        }
    }

    SUBCASE("clip passes gradient inside the interval only") {
        auto a = random_tensor(rng, 2, 8, -3.0, 3.0);
        for (auto& x : a.v)
            if (std::fabs(std::fabs(x) - 1.0) < 0.05) x *= 1.2; // stay off the boundary
        CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return t.sum_all(t.clip_(v[0], -1.0, 1.0));
              }) < tol);
    }

    SUBCASE("minsum subgradient") {
        for (int trial = 0; trial < 12; ++trial) {
            auto a = random_tensor(rng, 2, 6);
            auto b = random_tensor(rng, 2, 6);
            // keep |a| and |b| separated so the subgradient is unambiguous
            for (int i = 0; i < a.size(); ++i)
                if (std::fabs(std::fabs(a.v[i]) - std::fabs(b.v[i])) < 0.05) b.v[i] += 0.2;
            CHECK(max_rel_fd_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                      return t.sum_all(t.minsum(v[0], v[1]));
                  }) < tol);
        }
    }

    SUBCASE("gathers, interleave, concat, reshape, reductions") {
        auto a = random_tensor(rng, 3, 6);
        auto b = random_tensor(rng, 3, 3);
        CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return t.sum_all(t.gather_cols(v[0], {5, 0, 2, 2}));
              }) < tol);
        CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return t.sum_all(t.gather_rows(v[0], {1, 1, 0}));
              }) < tol);
        CHECK(max_rel_fd_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  Var i = t.interleave_cols(t.gather_cols(v[0], {0, 1, 2}), {0, 2, 4}, v[1],
                                            {1, 3, 5}, 6);
                  return t.mean_all(t.mul(i, i));
              }) < tol);
        CHECK(max_rel_fd_error({a, b}, [](Tape& t, std::vector<Var>& v) {
                  return t.sum_all(t.concat_cols({v[0], v[1]}));
              }) < tol);
        CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return t.sum_all(t.row_mean(t.reshape(v[0], 2, 9)));
              }) < tol);
        CHECK(max_rel_fd_error({a}, [](Tape& t, std::vector<Var>& v) {
                  return t.mean_all(t.row_sum(v[0]));
              }) < tol);
    }
}

TEST_CASE("tape: straight-through binarize has an identity jacobian") {
    auto rng = make_rng(103);
    Tensor a = random_tensor(rng, 1, 8, 0.0, 1.0);
    Tensor th = random_tensor(rng, 1, 8, 0.0, 1.0);
    for (int k = 0; k < 8; ++k) {
        Tape tp;
        Var x = tp.param(a);
        Var b = tp.st_binarize(x, tp.constant(th));
        // forward is the comparison
        for (int i = 0; i < 8; ++i) CHECK(tp.val(b).v[i] == (a.v[i] > th.v[i] ? 1.0 : 0.0));
        Var probe = tp.sum_all(tp.gather_cols(b, {k}));
        tp.backward(probe);
        for (int i = 0; i < 8; ++i) CHECK(tp.grad(x).v[i] == (i == k ? 1.0 : 0.0));
    }
}

TEST_CASE("tape: gradient accumulates over reuse of a node") {
    Tape tp;
    Var x = tp.param(Tensor::scalar(2.0));
    Var y = tp.add(tp.mul(x, x), x); // x^2 + x -> d/dx = 2x + 1 = 5
    tp.backward(y);
    CHECK(tp.grad(x).v[0] == doctest::Approx(5.0));
}

TEST_CASE("tape: backward requires a scalar root") {
    Tape tp;
    Var x = tp.param(Tensor(2, 2, 1.0));
    CHECK_THROWS_AS(tp.backward(x), std::invalid_argument);
}

TEST_CASE("losses: finite differences on each term") {
    auto rng = make_rng(107);
    learn::LossWeights w = learn::LossWeights::defaults(0.06, 0.5);
    const double tol = 1e-4;
    for (int trial = 0; trial < 10; ++trial) {
        auto bhat = random_tensor(rng, 1, 12, 0.05, 0.95);
        std::vector<double> bits(12);
        for (auto& b : bits) b = (double)(rng() & 1);
        CHECK(max_rel_fd_error({bhat}, [&](Tape& t, std::vector<Var>& v) {
                  return learn::tape_loss_wit(t, bits, v[0]);
              }) < tol);
        auto pout = random_tensor(rng, 6, 1, 0.01, 0.12);
        CHECK(max_rel_fd_error({pout}, [&](Tape& t, std::vector<Var>& v) {
                  return t.mean_all(learn::tape_loss_wet(t, v[0], w));
              }) < tol);
        auto fsoft = random_tensor(rng, 1, 16, -2.0, 2.0);
        CHECK(max_rel_fd_error({fsoft}, [&](Tape& t, std::vector<Var>& v) {
                  return learn::tape_loss_rate(t, v[0], w);
              }) < tol);
        Tensor bmat = random_tensor(rng, 6, 8, 0.0, 1.0);
        for (auto& x : bmat.v) x = x > 0.5 ? 1.0 : 0.0;
        auto bhat2 = random_tensor(rng, 6, 8, 0.05, 0.95);
        CHECK(max_rel_fd_error({bhat2, pout, fsoft}, [&](Tape& t, std::vector<Var>& v) {
                  return learn::tape_loss_total(t, bmat, v[0], v[1], v[2], w);
              }) < tol);
    }
}

TEST_CASE("losses: rate-gradient matches the closed form") {
    auto rng = make_rng(109);
    learn::LossWeights w = learn::LossWeights::defaults(0.05, 0.4);
    const int N = 10;
    auto fsoft = random_tensor(rng, 1, N, -2.0, 2.0);
    Tape tp;
    Var v = tp.param(fsoft);
    tp.backward(learn::tape_loss_rate(tp, v, w));
    double r = 0.0;
    for (double x : fsoft.v) r += sigmoid(x);
    r /= N;
    for (int i = 0; i < N; ++i) {
        const double s = sigmoid(fsoft.v[i]);
        const double expect = 2.0 * (r - w.r_targ) * s * (1.0 - s) / N;
        CHECK(tp.grad(v).v[i] == doctest::Approx(expect).epsilon(1e-9));
    }
}
