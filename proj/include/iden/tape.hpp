#pragma once

#include "iden/common.hpp"

#include <deque>

namespace iden::ad {

struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v((size_t)r * c, fill) {}
    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor row(std::vector<double> data) {
        Tensor t;
        t.rows = 1;
        t.cols = (int)data.size();
        t.v = std::move(data);
        return t;
    }
    static Tensor col(std::vector<double> data) {
        Tensor t;
        t.rows = (int)data.size();
        t.cols = 1;
        t.v = std::move(data);
        return t;
    }
    double& at(int r, int c) { return v[(size_t)r * cols + c]; }
    double at(int r, int c) const { return v[(size_t)r * cols + c]; }
    int size() const { return rows * cols; }
};

using Var = int;

// Append-only record of primitive operations. backward() visits nodes in
// reverse creation order (a reverse topological order by construction) exactly
// once and accumulates gradients additively. Graphs are rebuilt per training
// step; parameters live outside the tape and are re-registered each step.
class Tape {
public:
    Var constant(Tensor t);
    Var param(Tensor t);

    // Elementwise binary ops accept equal shapes, a 1x1 right operand, or a
    // 1xC right operand broadcast across rows.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var matmul(Var a, Var b);

    Var relu(Var a);
    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var sqrt_(Var a);
    Var neg(Var a) { return scale(a, -1.0); }
    Var scale(Var a, double k);
    Var add_scalar(Var a, double k);
    Var clip_(Var a, double lo, double hi);

    // sign(a) sign(b) min(|a|,|b|) with the min-sum subgradient: gradient goes
    // to the smaller-magnitude argument (ties to the first), scaled by the
    // sign of the other.
    Var minsum(Var a, Var b);

    // Forward (a > thresh) ? 1 : 0; backward passes the gradient through to a
    // unchanged (straight-through).
    Var st_binarize(Var a, Var thresh);

    Var gather_cols(Var a, std::vector<int> idx);
    Var gather_rows(Var a, std::vector<int> idx);
    // Build an R x out_cols tensor from two column groups.
    Var interleave_cols(Var a, std::vector<int> ia, Var b, std::vector<int> ib, int out_cols);
    Var concat_cols(const std::vector<Var>& xs);
    Var reshape(Var a, int r, int c);

    Var sum_all(Var a);
    Var mean_all(Var a);
    Var row_sum(Var a);
    Var row_mean(Var a);

    const Tensor& val(Var v) const { return nodes_[v].val; }
    const Tensor& grad(Var v) const;
    bool has_grad(Var v) const;
    void backward(Var root);
    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        Const, Param, Add, Sub, Mul, Div, MatMul, Relu, Tanh, Sigmoid, Exp, Log, Sqrt,
        Scale, AddConst, Clip, MinsumG, StBinarize, GatherCols, GatherRows, InterleaveCols,
        ConcatCols, Reshape, SumAll, MeanAll, RowSum, RowMean
    };
    struct Node {
        Op op;
        int a = -1, b = -1;
        Tensor val;
        std::vector<int> idx, idx2;
        std::vector<int> parts; // ConcatCols inputs
        double x0 = 0.0, x1 = 0.0;
        bool needs_grad = false;
    };

    // Deque keeps element addresses stable across push, so Tensor references
    // returned by val() stay valid while the graph grows.
    std::deque<Node> nodes_;
    std::deque<Tensor> grads_;

    Var push(Node n);
    Var unary(Op op, Var a);
    Var binary(Op op, Var a, Var b);
    void check(Var v) const;
    Tensor& g(Var v);
};

} // namespace iden::ad
