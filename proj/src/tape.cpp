#include "iden/tape.hpp"

#include <cmath>

namespace iden::ad {

namespace {

bool broadcast_ok(const Tensor& a, const Tensor& b) {
    if (a.rows == b.rows && a.cols == b.cols) return true;
    if (b.rows == 1 && b.cols == 1) return true;
    if (b.rows == 1 && b.cols == a.cols) return true;
    return false;
}

inline double bval(const Tensor& b, int r, int c) {
    if (b.rows == 1 && b.cols == 1) return b.v[0];
    if (b.rows == 1) return b.v[c];
    return b.at(r, c);
}

// Accumulate an elementwise gradient contribution into the (possibly
// broadcast) right operand.
inline void bacc(Tensor& gb, const Tensor& shape_b, int r, int c, double val) {
    if (shape_b.rows == 1 && shape_b.cols == 1) gb.v[0] += val;
    else if (shape_b.rows == 1) gb.v[c] += val;
    else gb.at(r, c) += val;
}

} // namespace

void Tape::check(Var v) const {
    if (v < 0 || v >= (int)nodes_.size()) throw std::logic_error("tape: bad var handle");
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return (int)nodes_.size() - 1;
}

Var Tape::constant(Tensor t) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(t);
    return push(std::move(n));
}

Var Tape::param(Tensor t) {
    Node n;
    n.op = Op::Param;
    n.val = std::move(t);
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::binary(Op op, Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    if (op == Op::MatMul) {
        if (ta.cols != tb.rows) throw std::invalid_argument("tape matmul: inner dimension mismatch");
        n.val = Tensor(ta.rows, tb.cols);
        const int R = ta.rows, K = ta.cols, C = tb.cols;
#pragma omp parallel for if (R >= 128) schedule(static)
        for (int r = 0; r < R; ++r)
            for (int k = 0; k < K; ++k) {
                const double av = ta.at(r, k);
                if (av == 0.0) continue;
                double* out = n.val.v.data() + (size_t)r * C;
                const double* brow = tb.v.data() + (size_t)k * C;
                for (int c = 0; c < C; ++c) out[c] += av * brow[c];
            }
        return push(std::move(n));
    }
    if (op == Op::MinsumG) {
        if (ta.rows != tb.rows || ta.cols != tb.cols)
            throw std::invalid_argument("tape minsum: shape mismatch");
    } else if (!broadcast_ok(ta, tb)) {
        throw std::invalid_argument("tape: incompatible shapes for elementwise op: " +
                                    std::to_string(ta.rows) + "x" + std::to_string(ta.cols) +
                                    " vs " + std::to_string(tb.rows) + "x" + std::to_string(tb.cols));
    }
    n.val = Tensor(ta.rows, ta.cols);
    for (int r = 0; r < ta.rows; ++r)
        for (int c = 0; c < ta.cols; ++c) {
            const double x = ta.at(r, c);
            const double y = (op == Op::MinsumG) ? tb.at(r, c) : bval(tb, r, c);
            double o = 0.0;
            switch (op) {
                case Op::Add: o = x + y; break;
                case Op::Sub: o = x - y; break;
                case Op::Mul: o = x * y; break;
                case Op::Div: o = x / y; break;
                case Op::MinsumG: {
                    const double s = ((x < 0.0) != (y < 0.0)) ? -1.0 : 1.0;
                    o = s * std::min(std::fabs(x), std::fabs(y));
                    break;
                }
                default: throw std::logic_error("tape: bad binary op");
            }
            n.val.at(r, c) = o;
        }
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return binary(Op::Add, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::Mul, a, b); }
Var Tape::div(Var a, Var b) { return binary(Op::Div, a, b); }
Var Tape::matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }
Var Tape::minsum(Var a, Var b) { return binary(Op::MinsumG, a, b); }

Var Tape::unary(Op op, Var a) {
    check(a);
    const Tensor& ta = nodes_[a].val;
    Node n;
    n.op = op;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = Tensor(ta.rows, ta.cols);
    for (int i = 0; i < ta.size(); ++i) {
        const double x = ta.v[i];
        double o = 0.0;
        switch (op) {
            case Op::Relu: o = x > 0.0 ? x : 0.0; break;
            case Op::Tanh: o = std::tanh(x); break;
            case Op::Sigmoid: o = sigmoid(x); break;
            case Op::Exp: o = std::exp(x); break;
            case Op::Log: o = std::log(x); break;
            case Op::Sqrt: o = std::sqrt(x); break;
            default: throw std::logic_error("tape: bad unary op");
        }
        n.val.v[i] = o;
    }
    return push(std::move(n));
}

Var Tape::relu(Var a) { return unary(Op::Relu, a); }
Var Tape::tanh_(Var a) { return unary(Op::Tanh, a); }
Var Tape::sigmoid_(Var a) { return unary(Op::Sigmoid, a); }
Var Tape::exp_(Var a) { return unary(Op::Exp, a); }
Var Tape::log_(Var a) { return unary(Op::Log, a); }
Var Tape::sqrt_(Var a) { return unary(Op::Sqrt, a); }

Var Tape::scale(Var a, double k) {
    check(a);
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.x0 = k;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = nodes_[a].val;
    for (auto& x : n.val.v) x *= k;
    return push(std::move(n));
}

Var Tape::add_scalar(Var a, double k) {
    check(a);
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.x0 = k;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = nodes_[a].val;
    for (auto& x : n.val.v) x += k;
    return push(std::move(n));
}

Var Tape::clip_(Var a, double lo, double hi) {
    check(a);
    Node n;
    n.op = Op::Clip;
    n.a = a;
    n.x0 = lo;
    n.x1 = hi;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = nodes_[a].val;
    for (auto& x : n.val.v) x = clip(x, lo, hi);
    return push(std::move(n));
}

Var Tape::st_binarize(Var a, Var thresh) {
    check(a);
    check(thresh);
    const Tensor& ta = nodes_[a].val;
    const Tensor& tt = nodes_[thresh].val;
    if (ta.rows != tt.rows || ta.cols != tt.cols)
        throw std::invalid_argument("tape st_binarize: shape mismatch");
    Node n;
    n.op = Op::StBinarize;
    n.a = a;
    n.b = thresh;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = Tensor(ta.rows, ta.cols);
    for (int i = 0; i < ta.size(); ++i) n.val.v[i] = ta.v[i] > tt.v[i] ? 1.0 : 0.0;
    return push(std::move(n));
}

Var Tape::gather_cols(Var a, std::vector<int> idx) {
    check(a);
    const Tensor& ta = nodes_[a].val;
    Node n;
    n.op = Op::GatherCols;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = Tensor(ta.rows, (int)idx.size());
    for (int r = 0; r < ta.rows; ++r)
        for (size_t c = 0; c < idx.size(); ++c) n.val.at(r, (int)c) = ta.at(r, idx[c]);
    n.idx = std::move(idx);
    return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
    check(a);
    const Tensor& ta = nodes_[a].val;
    Node n;
    n.op = Op::GatherRows;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = Tensor((int)idx.size(), ta.cols);
    for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < ta.cols; ++c) n.val.at((int)r, c) = ta.at(idx[r], c);
    n.idx = std::move(idx);
    return push(std::move(n));
}

Var Tape::interleave_cols(Var a, std::vector<int> ia, Var b, std::vector<int> ib, int out_cols) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.rows != tb.rows) throw std::invalid_argument("tape interleave: row mismatch");
    if ((int)ia.size() != ta.cols || (int)ib.size() != tb.cols)
        throw std::invalid_argument("tape interleave: index count mismatch");
    Node n;
    n.op = Op::InterleaveCols;
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.val = Tensor(ta.rows, out_cols);
    for (int r = 0; r < ta.rows; ++r) {
        for (size_t c = 0; c < ia.size(); ++c) n.val.at(r, ia[c]) = ta.at(r, (int)c);
        for (size_t c = 0; c < ib.size(); ++c) n.val.at(r, ib[c]) = tb.at(r, (int)c);
    }
    n.idx = std::move(ia);
    n.idx2 = std::move(ib);
    return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("tape concat: empty input");
    int cols = 0;
    const int rows = nodes_[xs[0]].val.rows;
    for (Var x : xs) {
        check(x);
        if (nodes_[x].val.rows != rows) throw std::invalid_argument("tape concat: row mismatch");
        cols += nodes_[x].val.cols;
    }
    Node n;
    n.op = Op::ConcatCols;
    n.val = Tensor(rows, cols);
    int off = 0;
    for (Var x : xs) {
        const Tensor& t = nodes_[x].val;
        n.needs_grad = n.needs_grad || nodes_[x].needs_grad;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < t.cols; ++c) n.val.at(r, off + c) = t.at(r, c);
        off += t.cols;
        n.parts.push_back(x);
    }
    return push(std::move(n));
}

Var Tape::reshape(Var a, int r, int c) {
    check(a);
    const Tensor& ta = nodes_[a].val;
    if (r * c != ta.size()) throw std::invalid_argument("tape reshape: size mismatch");
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = ta;
    n.val.rows = r;
    n.val.cols = c;
    return push(std::move(n));
}

Var Tape::sum_all(Var a) {
    check(a);
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    double s = 0.0;
    for (double x : nodes_[a].val.v) s += x;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

Var Tape::mean_all(Var a) {
    check(a);
    Node n;
    n.op = Op::MeanAll;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    double s = 0.0;
    for (double x : nodes_[a].val.v) s += x;
    n.val = Tensor::scalar(s / nodes_[a].val.size());
    return push(std::move(n));
}

Var Tape::row_sum(Var a) {
    check(a);
    const Tensor& ta = nodes_[a].val;
    Node n;
    n.op = Op::RowSum;
    n.a = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.val = Tensor(ta.rows, 1);
    for (int r = 0; r < ta.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < ta.cols; ++c) s += ta.at(r, c);
        n.val.at(r, 0) = s;
    }
    return push(std::move(n));
}

Var Tape::row_mean(Var a) {
    Var s = row_sum(a);
    return scale(s, 1.0 / nodes_[a].val.cols);
}

Tensor& Tape::g(Var v) {
    if (grads_[v].size() == 0) grads_[v] = Tensor(nodes_[v].val.rows, nodes_[v].val.cols);
    return grads_[v];
}

bool Tape::has_grad(Var v) const {
    check(v);
    return grads_[v].size() != 0;
}

const Tensor& Tape::grad(Var v) const {
    check(v);
    if (grads_[v].size() == 0) throw std::logic_error("tape: gradient not computed for this var");
    return grads_[v];
}

void Tape::backward(Var root) {
    check(root);
    if (nodes_[root].val.size() != 1) throw std::invalid_argument("tape backward: root must be scalar");
    for (auto& t : grads_) t = Tensor();
    g(root).v[0] = 1.0;
    for (int v = root; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.needs_grad || grads_[v].size() == 0) continue;
        const Tensor& go = grads_[v];
        switch (n.op) {
            case Op::Const:
            case Op::Param:
                break;
            case Op::Add:
            case Op::Sub: {
                const double sgn = n.op == Op::Sub ? -1.0 : 1.0;
                const Tensor& tb = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Tensor& ga = g(n.a);
                    for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor& gb = g(n.b);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) bacc(gb, tb, r, c, sgn * go.at(r, c));
                }
                break;
            }
            case Op::Mul: {
                const Tensor& ta = nodes_[n.a].val;
                const Tensor& tb = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Tensor& ga = g(n.a);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) ga.at(r, c) += go.at(r, c) * bval(tb, r, c);
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor& gb = g(n.b);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) bacc(gb, tb, r, c, go.at(r, c) * ta.at(r, c));
                }
                break;
            }
            case Op::Div: {
                const Tensor& ta = nodes_[n.a].val;
                const Tensor& tb = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Tensor& ga = g(n.a);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) ga.at(r, c) += go.at(r, c) / bval(tb, r, c);
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor& gb = g(n.b);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < go.cols; ++c) {
                            const double bv = bval(tb, r, c);
                            bacc(gb, tb, r, c, -go.at(r, c) * ta.at(r, c) / (bv * bv));
                        }
                }
                break;
            }
            case Op::MatMul: {
                const Tensor& ta = nodes_[n.a].val;
                const Tensor& tb = nodes_[n.b].val;
                const int R = ta.rows, K = ta.cols, C = tb.cols;
                if (nodes_[n.a].needs_grad) {
                    Tensor& ga = g(n.a);
#pragma omp parallel for if (R >= 128) schedule(static)
                    for (int r = 0; r < R; ++r)
                        for (int k = 0; k < K; ++k) {
                            double acc = 0.0;
                            const double* grow = go.v.data() + (size_t)r * C;
                            const double* brow = tb.v.data() + (size_t)k * C;
                            for (int c = 0; c < C; ++c) acc += grow[c] * brow[c];
                            ga.at(r, k) += acc;
                        }
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor& gb = g(n.b);
#pragma omp parallel for if (K >= 128) schedule(static)
                    for (int k = 0; k < K; ++k)
                        for (int r = 0; r < R; ++r) {
                            const double av = ta.at(r, k);
                            if (av == 0.0) continue;
                            double* grow = gb.v.data() + (size_t)k * C;
                            const double* gorow = go.v.data() + (size_t)r * C;
                            for (int c = 0; c < C; ++c) grow[c] += av * gorow[c];
                        }
                }
                break;
            }
            case Op::Relu: {
                const Tensor& ta = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i)
                    if (ta.v[i] > 0.0) ga.v[i] += go.v[i];
                break;
            }
            case Op::Tanh: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i)
                    ga.v[i] += go.v[i] * n.val.v[i] * (1.0 - n.val.v[i]);
                break;
            }
            case Op::Exp: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * n.val.v[i];
                break;
            }
            case Op::Log: {
                const Tensor& ta = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] / ta.v[i];
                break;
            }
            case Op::Sqrt: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * 0.5 / n.val.v[i];
                break;
            }
            case Op::Scale: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * n.x0;
                break;
            }
            case Op::AddConst: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
                break;
            }
            case Op::Clip: {
                const Tensor& ta = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i)
                    if (ta.v[i] >= n.x0 && ta.v[i] <= n.x1) ga.v[i] += go.v[i];
                break;
            }
            case Op::MinsumG: {
                const Tensor& ta = nodes_[n.a].val;
                const Tensor& tb = nodes_[n.b].val;
                const bool wa = nodes_[n.a].needs_grad, wb = nodes_[n.b].needs_grad;
                Tensor* ga = wa ? &g(n.a) : nullptr;
                Tensor* gb = wb ? &g(n.b) : nullptr;
                for (int i = 0; i < go.size(); ++i) {
                    const double x = ta.v[i], y = tb.v[i];
                    const double sx = x < 0.0 ? -1.0 : 1.0, sy = y < 0.0 ? -1.0 : 1.0;
                    if (std::fabs(x) <= std::fabs(y)) {
                        if (ga) ga->v[i] += go.v[i] * sy;
                    } else if (gb) {
                        gb->v[i] += go.v[i] * sx;
                    }
                }
                break;
            }
            case Op::StBinarize: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
                break;
            }
            case Op::GatherCols: {
                Tensor& ga = g(n.a);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) ga.at(r, n.idx[c]) += go.at(r, c);
                break;
            }
            case Op::GatherRows: {
                Tensor& ga = g(n.a);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) ga.at(n.idx[r], c) += go.at(r, c);
                break;
            }
            case Op::InterleaveCols: {
                if (nodes_[n.a].needs_grad) {
                    Tensor& ga = g(n.a);
                    for (int r = 0; r < go.rows; ++r)
                        for (size_t c = 0; c < n.idx.size(); ++c)
                            ga.at(r, (int)c) += go.at(r, n.idx[c]);
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor& gb = g(n.b);
                    for (int r = 0; r < go.rows; ++r)
                        for (size_t c = 0; c < n.idx2.size(); ++c)
                            gb.at(r, (int)c) += go.at(r, n.idx2[c]);
                }
                break;
            }
            case Op::ConcatCols: {
                int off = 0;
                for (Var part : n.parts) {
                    const Tensor& tp = nodes_[part].val;
                    if (nodes_[part].needs_grad) {
                        Tensor& gp = g(part);
                        for (int r = 0; r < go.rows; ++r)
                            for (int c = 0; c < tp.cols; ++c) gp.at(r, c) += go.at(r, off + c);
                    }
                    off += tp.cols;
                }
                break;
            }
            case Op::Reshape: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
                break;
            }
            case Op::SumAll: {
                Tensor& ga = g(n.a);
                for (auto& x : ga.v) x += go.v[0];
                break;
            }
            case Op::MeanAll: {
                Tensor& ga = g(n.a);
                const double k = go.v[0] / nodes_[n.a].val.size();
                for (auto& x : ga.v) x += k;
                break;
            }
            case Op::RowSum: {
                Tensor& ga = g(n.a);
                for (int r = 0; r < ga.rows; ++r)
                    for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += go.at(r, 0);
                break;
            }
            case Op::RowMean:
                throw std::logic_error("tape: RowMean is composite");
        }
    }
}

} // namespace iden::ad
