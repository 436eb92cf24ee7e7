#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Graph is a tape: every operation evaluates eagerly and records enough
// to run the reverse sweep. The operator set is exactly what the sequence
// networks need: matrix product, addition (plain and row-broadcast),
// scaling, GELU, row-wise layer normalization and softmax, column
// slicing/concatenation, scaled dot-product attention, and two scalar
// losses. No general broadcasting, no higher ranks.
//
// Scalar type is a template parameter; float is the production precision
// and double is the verification mode used by grad_check.

#include "posestitch/common.hpp"
#include "posestitch/params.hpp"

#include <functional>
#include <string>
#include <vector>

namespace posestitch {

template <class S>
class Graph {
public:
    using Mat = MatX<S>;

    // track=false skips gradient bookkeeping (pure inference).
    explicit Graph(bool track = true) : track_(track) {}

    bool tracking() const { return track_; }

    int input(Mat v) { return push(Op::Input, {}, std::move(v)); }

    int param(const std::string& name, const Mat& v) {
        int id = push(Op::Param, {}, v);
        if (track_) params_.emplace_back(name, id);
        return id;
    }

    int matmul(int a, int b) {
        check_cols_rows(a, b, "matmul");
        return push(Op::MatMul, {a, b}, val(a) * val(b));
    }

    // a * b^T, used for attention scores.
    int matmul_t(int a, int b) {
        if (val(a).cols() != val(b).cols())
            throw Error("matmul_t: inner dimensions disagree");
        return push(Op::MatMulT, {a, b}, val(a) * val(b).transpose());
    }

    int add(int a, int b) {
        check_same_shape(a, b, "add");
        return push(Op::Add, {a, b}, val(a) + val(b));
    }

    // a + row broadcast over all rows; row must be 1 x cols(a).
    int add_row(int a, int row) {
        if (val(row).rows() != 1 || val(row).cols() != val(a).cols())
            throw Error("add_row: row operand must be 1 x cols");
        return push(Op::AddRow, {a, row}, val(a).rowwise() + val(row).row(0));
    }

    int scale(int a, S factor) {
        int id = push(Op::Scale, {a}, val(a) * factor);
        nodes_[id].factor = factor;
        return id;
    }

    int gelu(int a) {
        Mat y = val(a).unaryExpr([](S x) {
            return S(0.5) * x * (S(1) + S(std::erf(double(x) / std::sqrt(2.0))));
        });
        return push(Op::Gelu, {a}, std::move(y));
    }

    // Row-wise normalization with learned gain/bias (each 1 x cols).
    int layer_norm(int x, int gain, int bias) {
        if (val(gain).rows() != 1 || val(gain).cols() != val(x).cols() ||
            val(bias).rows() != 1 || val(bias).cols() != val(x).cols())
            throw Error("layer_norm: gain/bias must be 1 x cols");
        const Mat& v = val(x);
        const S eps = S(1e-5);
        Mat xhat(v.rows(), v.cols());
        Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(v.rows());
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            S mu = v.row(r).mean();
            auto d = (v.row(r).array() - mu).eval();
            S var = d.square().mean();
            S is = S(1) / std::sqrt(var + eps);
            inv_std(r) = is;
            xhat.row(r) = (d * is).matrix();
        }
        Mat y = (xhat.array().rowwise() * val(gain).row(0).array()).matrix().rowwise() +
                val(bias).row(0);
        int id = push(Op::LayerNorm, {x, gain, bias}, std::move(y));
        nodes_[id].aux = std::move(xhat);
        nodes_[id].aux_vec = std::move(inv_std);
        return id;
    }

    int softmax_rows(int a) { return softmax_rows_masked(a, {}); }

    // masked_cols[j] != 0 excludes column j (score treated as -inf).
    // Throws if every column is masked.
    int softmax_rows_masked(int a, std::vector<char> masked_cols) {
        const Mat& v = val(a);
        if (!masked_cols.empty() && Eigen::Index(masked_cols.size()) != v.cols())
            throw Error("softmax: mask length must equal column count");
        bool any_open = masked_cols.empty();
        for (char m : masked_cols)
            if (!m) any_open = true;
        if (!any_open) throw Error("softmax: all keys masked");
        Mat y(v.rows(), v.cols());
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            S mx = std::numeric_limits<S>::lowest();
            for (Eigen::Index c = 0; c < v.cols(); ++c)
                if (masked_cols.empty() || !masked_cols[c]) mx = std::max(mx, v(r, c));
            S sum = S(0);
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                if (!masked_cols.empty() && masked_cols[c]) {
                    y(r, c) = S(0);
                } else {
                    y(r, c) = std::exp(v(r, c) - mx);
                    sum += y(r, c);
                }
            }
            y.row(r) /= sum;
        }
        int id = push(Op::SoftmaxRows, {a}, std::move(y));
        nodes_[id].colmask = std::move(masked_cols);
        return id;
    }

    int slice_cols(int a, int start, int width) {
        if (start < 0 || width < 1 || start + width > val(a).cols())
            throw Error("slice_cols: range out of bounds");
        int id = push(Op::SliceCols, {a}, val(a).middleCols(start, width));
        nodes_[id].start = start;
        return id;
    }

    int concat_cols(const std::vector<int>& parts) {
        if (parts.empty()) throw Error("concat_cols: no operands");
        Eigen::Index rows = val(parts[0]).rows(), cols = 0;
        for (int p : parts) {
            if (val(p).rows() != rows) throw Error("concat_cols: row counts disagree");
            cols += val(p).cols();
        }
        Mat y(rows, cols);
        Eigen::Index off = 0;
        for (int p : parts) {
            y.middleCols(off, val(p).cols()) = val(p);
            off += val(p).cols();
        }
        return push(Op::ConcatCols, parts, std::move(y));
    }

    // Scaled dot-product attention: softmax(q k^T / sqrt(d)) v.
    // masked_keys (over rows of k/v) excludes keys from every query.
    int attention(int q, int k, int v, const std::vector<char>& masked_keys = {}) {
        if (val(q).cols() != val(k).cols()) throw Error("attention: q/k dim mismatch");
        if (val(k).rows() != val(v).rows()) throw Error("attention: k/v length mismatch");
        S inv = S(1) / S(std::sqrt(double(val(q).cols())));
        int scores = scale(matmul_t(q, k), inv);
        int probs = softmax_rows_masked(scores, masked_keys);
        return matmul(probs, v);
    }

    // Mean absolute difference against a constant target, over all entries.
    // Result is a 1x1 node.
    int mean_abs_err(int a, Mat target) {
        if (val(a).rows() != target.rows() || val(a).cols() != target.cols())
            throw Error("mean_abs_err: shape mismatch");
        Mat y(1, 1);
        y(0, 0) = (val(a) - target).array().abs().mean();
        int id = push(Op::MeanAbsErr, {a}, std::move(y));
        nodes_[id].aux = std::move(target);
        return id;
    }

    // Sum of squared entries, as a 1x1 node.
    int sum_squares(int a) {
        Mat y(1, 1);
        y(0, 0) = val(a).array().square().sum();
        return push(Op::SumSquares, {a}, std::move(y));
    }

    const Mat& value(int id) const { return nodes_[std::size_t(id)].value; }
    const Mat& gradient(int id) const { return nodes_[std::size_t(id)].grad; }

    // Reverse sweep from a 1x1 loss node. Single-threaded, fixed order.
    void backward(int loss) {
        if (!track_) throw Error("backward: graph built without gradient tracking");
        if (value(loss).size() != 1) throw Error("backward: loss must be 1x1");
        for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        nodes_[std::size_t(loss)].grad(0, 0) = S(1);
        for (int id = int(nodes_.size()) - 1; id >= 0; --id) backprop(id);
    }

    // Gradients of all registered params, keyed by name. Call after backward.
    NamedTensors<S> param_grads() const {
        NamedTensors<S> out;
        for (const auto& [name, id] : params_) out[name] = nodes_[std::size_t(id)].grad;
        return out;
    }

private:
    enum class Op {
        Input, Param, MatMul, MatMulT, Add, AddRow, Scale, Gelu,
        LayerNorm, SoftmaxRows, SliceCols, ConcatCols, MeanAbsErr, SumSquares
    };

    struct Node {
        Op op;
        std::vector<int> in;
        Mat value, grad;
        Mat aux;                                    // op-specific cache
        Eigen::Matrix<S, Eigen::Dynamic, 1> aux_vec;
        std::vector<char> colmask;
        S factor = S(0);
        int start = 0;
    };

    int push(Op op, std::vector<int> in, Mat v) {
        if (!v.allFinite()) throw Error("graph: non-finite value produced");
        nodes_.push_back(Node{op, std::move(in), std::move(v), {}, {}, {}, {}, S(0), 0});
        return int(nodes_.size()) - 1;
    }

    const Mat& val(int id) const { return nodes_[std::size_t(id)].value; }
    Mat& grad_of(int id) { return nodes_[std::size_t(id)].grad; }

    void check_cols_rows(int a, int b, const char* what) const {
        if (val(a).cols() != val(b).rows())
            throw Error(std::string(what) + ": inner dimensions disagree");
    }
    void check_same_shape(int a, int b, const char* what) const {
        if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
            throw Error(std::string(what) + ": shapes disagree");
    }

    void backprop(int id) {
        Node& n = nodes_[std::size_t(id)];
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::Input:
            case Op::Param:
                break;
            case Op::MatMul:
                grad_of(n.in[0]) += g * val(n.in[1]).transpose();
                grad_of(n.in[1]) += val(n.in[0]).transpose() * g;
                break;
            case Op::MatMulT:
                grad_of(n.in[0]) += g * val(n.in[1]);
                grad_of(n.in[1]) += g.transpose() * val(n.in[0]);
                break;
            case Op::Add:
                grad_of(n.in[0]) += g;
                grad_of(n.in[1]) += g;
                break;
            case Op::AddRow:
                grad_of(n.in[0]) += g;
                grad_of(n.in[1]) += g.colwise().sum();
                break;
            case Op::Scale:
                grad_of(n.in[0]) += g * n.factor;
                break;
            case Op::Gelu: {
                const Mat& x = val(n.in[0]);
                Mat d = x.unaryExpr([](S v) {
                    double xv = double(v);
                    double phi = 0.5 * (1.0 + std::erf(xv / std::sqrt(2.0)));
                    double pdf = std::exp(-0.5 * xv * xv) / std::sqrt(2.0 * M_PI);
                    return S(phi + xv * pdf);
                });
                grad_of(n.in[0]) += g.cwiseProduct(d);
                break;
            }
            case Op::LayerNorm: {
                const Mat& xhat = n.aux;
                const Mat& gain = val(n.in[1]);
                Eigen::Index cols = xhat.cols();
                Mat dxhat = g.array().rowwise() * gain.row(0).array();
                Mat dx(xhat.rows(), cols);
                for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                    S m1 = dxhat.row(r).mean();
                    S m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                    dx.row(r) = n.aux_vec(r) *
                                (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                }
                grad_of(n.in[0]) += dx;
                grad_of(n.in[1]) += g.cwiseProduct(xhat).colwise().sum();
                grad_of(n.in[2]) += g.colwise().sum();
                break;
            }
            case Op::SoftmaxRows: {
                const Mat& y = n.value;
                Mat dx(y.rows(), y.cols());
                for (Eigen::Index r = 0; r < y.rows(); ++r) {
                    S dot = g.row(r).cwiseProduct(y.row(r)).sum();
                    dx.row(r) = y.row(r).array() * (g.row(r).array() - dot);
                }
                grad_of(n.in[0]) += dx;
                break;
            }
            case Op::SliceCols:
                grad_of(n.in[0]).middleCols(n.start, n.value.cols()) += g;
                break;
            case Op::ConcatCols: {
                Eigen::Index off = 0;
                for (int p : n.in) {
                    grad_of(p) += g.middleCols(off, val(p).cols());
                    off += val(p).cols();
                }
                break;
            }
            case Op::MeanAbsErr: {
                S w = g(0, 0) / S(n.aux.size());
                Mat diff = val(n.in[0]) - n.aux;
                grad_of(n.in[0]) +=
                    diff.unaryExpr([](S v) { return S(v > S(0)) - S(v < S(0)); }) * w;
                break;
            }
            case Op::SumSquares:
                grad_of(n.in[0]) += S(2) * g(0, 0) * val(n.in[0]);
                break;
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, int>> params_;
    bool track_;
};

// Convenience forward-only attention, matching Graph::attention.
template <class S>
MatX<S> attention(const MatX<S>& q, const MatX<S>& k, const MatX<S>& v,
                  const std::vector<char>& masked_keys = {}) {
    Graph<S> g(false);
    return g.value(g.attention(g.input(q), g.input(k), g.input(v), masked_keys));
}

// ---------------------------------------------------------------------------
// Adam

template <class S>
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    NamedTensors<S> first_moment, second_moment;
};

// Standard bias-corrected Adam update, in place. Only keys present in
// `grads` are touched; moments are created on first use. Iteration order is
// the map's name order, so repeated runs are bit-identical.
template <class S>
void adam_step(NamedTensors<S>& params, const NamedTensors<S>& grads, AdamState<S>& state) {
    state.step_count += 1;
    const S lr = S(state.learning_rate), b1 = S(state.beta1), b2 = S(state.beta2);
    const S eps = S(state.epsilon);
    const S c1 = S(1.0 - std::pow(state.beta1, double(state.step_count)));
    const S c2 = S(1.0 - std::pow(state.beta2, double(state.step_count)));
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw Error("adam_step: unknown parameter '" + name + "'");
        MatX<S>& p = it->second;
        if (p.rows() != g.rows() || p.cols() != g.cols())
            throw Error("adam_step: gradient shape mismatch for '" + name + "'");
        MatX<S>& m = state.first_moment.try_emplace(name, MatX<S>::Zero(p.rows(), p.cols()))
                         .first->second;
        MatX<S>& v = state.second_moment.try_emplace(name, MatX<S>::Zero(p.rows(), p.cols()))
                         .first->second;
        m = b1 * m + (S(1) - b1) * g;
        v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
        MatX<S> mhat = m / c1;
        MatX<S> vhat = v / c2;
        p -= (lr * mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    }
}

// ---------------------------------------------------------------------------
// Finite-difference verification (64-bit only)

// Builds a graph over the given params and returns the 1x1 loss node id.
using LossBuilder = std::function<int(Graph<double>&, const NamedTensors<double>&)>;

// Compares reverse-mode gradients against central finite differences
// (step 1e-5) at probe_count random parameter coordinates. Returns the max
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const LossBuilder& build, const NamedTensors<double>& params,
                         int probe_count, std::uint64_t seed = 1) {
    Graph<double> g(true);
    int loss = build(g, params);
    double base = g.value(loss)(0, 0);
    if (!std::isfinite(base)) throw Error("grad_check: non-finite loss");
    g.backward(loss);
    NamedTensors<double> analytic = g.param_grads();

    std::vector<std::string> keys;
    for (const auto& [name, t] : analytic)
        if (t.size() > 0) keys.push_back(name);
    if (keys.empty()) return 0.0;

    auto eval = [&](const NamedTensors<double>& p) {
        Graph<double> h(false);
        double v = h.value(build(h, p))(0, 0);
        if (!std::isfinite(v)) throw Error("grad_check: non-finite loss");
        return v;
    };

    const double step = 1e-5;
    double worst = 0.0;
    Rng rng(seed);
    NamedTensors<double> probe = params;
    for (int i = 0; i < probe_count; ++i) {
        const std::string& key = keys[rng.below(keys.size())];
        Eigen::Index flat = Eigen::Index(rng.below(std::uint64_t(analytic[key].size())));
        double* slot = probe[key].data() + flat;
        double saved = *slot;
        *slot = saved + step;
        double up = eval(probe);
        *slot = saved - step;
        double down = eval(probe);
        *slot = saved;
        double numeric = (up - down) / (2.0 * step);
        double a = analytic[key].data()[flat];
        double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace posestitch
