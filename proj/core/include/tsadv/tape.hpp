#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "tsadv/errors.hpp"
#include "tsadv/tensor.hpp"

namespace tsadv {

enum class BnMode { Train, Infer };

// Per-channel batch-norm running statistics, owned by the model (the tape only
// borrows a pointer so successive forward passes share state).
template <typename S>
struct BatchNormState {
    std::vector<S> running_mean;
    std::vector<S> running_var;
    S momentum = S(0.99);
    S eps = S(1e-3);
    bool initialized = false;
};

// Reverse-mode tape over the primitive set needed by 1-D CNNs. Nodes are
// appended in topological order; backward() walks them in reverse. Series
// tensors are [T,C] or batched [B,T,C]; both ranks are accepted everywhere.
template <typename S>
class GradientTape {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MapM = Eigen::Map<Mat>;
    using CMapM = Eigen::Map<const Mat>;

public:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;
        std::vector<int> inputs;
        bool leaf = false;
        // forward(first): recompute value from inputs; first==false on replay
        // (running statistics must not be re-updated then).
        std::function<void(bool)> forward;
        std::function<void()> backward;
    };

    int leaf(Tensor<S> t) {
        Node n;
        n.value = std::move(t);
        n.leaf = true;
        nodes_.push_back(std::move(n));
        return last();
    }

    const Tensor<S>& value(int id) const { return at(id).value; }
    const Tensor<S>& grad(int id) const {
        if (!ran_backward_) throw NumericError("gradient requested before backward()");
        return at(id).grad;
    }
    size_t num_nodes() const { return nodes_.size(); }
    bool is_leaf(int id) const { return at(id).leaf; }

    // --- primitives -------------------------------------------------------

    // Same-padded stride-1 1-D convolution. input [B,T,Cin] or [T,Cin],
    // kernels [k,Cin,Cout], bias [Cout]. Output keeps the input's rank.
    int conv1d(int input, int kernels, int bias) {
        const auto& x = value(input);
        const auto& w = value(kernels);
        const auto& b = value(bias);
        if (w.rank() != 3) throw DimensionError("conv1d kernels must be [k,Cin,Cout]");
        auto [B, T, Cin] = btc(x);
        const int k = w.dim(0), Cout = w.dim(2);
        if (w.dim(1) != Cin)
            throw DimensionError("conv1d: input channels " + std::to_string(Cin) +
                                 " vs kernel Cin " + std::to_string(w.dim(1)));
        if (b.rank() != 1 || b.dim(0) != Cout)
            throw DimensionError("conv1d: bias length must equal Cout");

        Node n;
        n.inputs = {input, kernels, bias};
        n.value = like(x, B, T, Cout);
        int id = push(std::move(n));
        // im2col patch matrix is shared between forward and backward
        auto cols = std::make_shared<Mat>(B * T, k * Cin);

        at(id).forward = [this, id, input, kernels, bias, cols, B, T, Cin, k, Cout](bool) {
            const auto& xv = value(input);
            im2col(xv.data(), *cols, B, T, Cin, k);
            CMapM W(value(kernels).data(), k * Cin, Cout);
            MapM Y(at(id).value.data(), B * T, Cout);
            Y.noalias() = (*cols) * W;
            Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bb(value(bias).data(), Cout);
            Y.rowwise() += bb.transpose();
        };
        at(id).forward(true);
        at(id).backward = [this, id, input, kernels, bias, cols, B, T, Cin, k, Cout]() {
            CMapM dY(at(id).grad.data(), B * T, Cout);
            CMapM W(value(kernels).data(), k * Cin, Cout);
            MapM dW(at(kernels).grad.data(), k * Cin, Cout);
            dW.noalias() += cols->transpose() * dY;
            Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(at(bias).grad.data(), Cout);
            db += dY.colwise().sum().transpose();
            Mat dCols = dY * W.transpose();
            col2im_add(dCols, at(input).grad.data(), B, T, Cin, k);
        };
        return id;
    }

    int batch_norm(int input, int gamma, int beta, BatchNormState<S>* state, BnMode mode) {
        const auto& x = value(input);
        auto [B, T, C] = btc(x);
        if (value(gamma).size() != static_cast<size_t>(C) ||
            value(beta).size() != static_cast<size_t>(C))
            throw DimensionError("batch_norm: gamma/beta length must equal channel count");
        if (mode == BnMode::Infer && !state->initialized)
            throw NumericError("batch_norm: inference requested before any training step");

        Node n;
        n.inputs = {input, gamma, beta};
        n.value = x;
        int id = push(std::move(n));
        const int N = B * T;
        auto mean = std::make_shared<std::vector<S>>(C);
        auto invstd = std::make_shared<std::vector<S>>(C);

        at(id).forward = [this, id, input, gamma, beta, state, mode, B, T, C, N, mean,
                          invstd](bool first) {
            const S* xp = value(input).data();
            const S* g = value(gamma).data();
            const S* be = value(beta).data();
            S* y = at(id).value.data();
            std::vector<S> var(C);
            if (mode == BnMode::Train) {
                std::fill(mean->begin(), mean->end(), S(0));
                std::fill(var.begin(), var.end(), S(0));
                for (int i = 0; i < N; ++i)
                    for (int c = 0; c < C; ++c) (*mean)[c] += xp[i * C + c];
                for (int c = 0; c < C; ++c) (*mean)[c] /= S(N);
                for (int i = 0; i < N; ++i)
                    for (int c = 0; c < C; ++c) {
                        S d = xp[i * C + c] - (*mean)[c];
                        var[c] += d * d;
                    }
                for (int c = 0; c < C; ++c) var[c] /= S(N);
                if (first) {
                    if (!state->initialized) {
                        state->running_mean = *mean;
                        state->running_var = var;
                        state->initialized = true;
                    } else {
                        for (int c = 0; c < C; ++c) {
                            state->running_mean[c] = state->momentum * state->running_mean[c] +
                                                     (S(1) - state->momentum) * (*mean)[c];
                            state->running_var[c] = state->momentum * state->running_var[c] +
                                                    (S(1) - state->momentum) * var[c];
                        }
                    }
                }
            } else {
                *mean = state->running_mean;
                var = state->running_var;
            }
            for (int c = 0; c < C; ++c)
                (*invstd)[c] = S(1) / std::sqrt(var[c] + state->eps);
            for (int i = 0; i < N; ++i)
                for (int c = 0; c < C; ++c)
                    y[i * C + c] = g[c] * (xp[i * C + c] - (*mean)[c]) * (*invstd)[c] + be[c];
        };
        at(id).forward(true);
        at(id).backward = [this, id, input, gamma, beta, mode, C, N, mean, invstd]() {
            const S* xp = value(input).data();
            const S* g = value(gamma).data();
            const S* dy = at(id).grad.data();
            S* dx = at(input).grad.data();
            S* dg = at(gamma).grad.data();
            S* db = at(beta).grad.data();
            for (int c = 0; c < C; ++c) {
                S sum_dy = 0, sum_dy_xhat = 0;
                for (int i = 0; i < N; ++i) {
                    S xhat = (xp[i * C + c] - (*mean)[c]) * (*invstd)[c];
                    sum_dy += dy[i * C + c];
                    sum_dy_xhat += dy[i * C + c] * xhat;
                }
                dg[c] += sum_dy_xhat;
                db[c] += sum_dy;
                if (mode == BnMode::Train) {
                    for (int i = 0; i < N; ++i) {
                        S xhat = (xp[i * C + c] - (*mean)[c]) * (*invstd)[c];
                        dx[i * C + c] += g[c] * (*invstd)[c] *
                                         (dy[i * C + c] - sum_dy / S(N) -
                                          xhat * sum_dy_xhat / S(N));
                    }
                } else {
                    for (int i = 0; i < N; ++i)
                        dx[i * C + c] += dy[i * C + c] * g[c] * (*invstd)[c];
                }
            }
        };
        return id;
    }

    int relu(int input) {
        Node n;
        n.inputs = {input};
        n.value = value(input);
        int id = push(std::move(n));
        at(id).forward = [this, id, input](bool) {
            const auto& x = value(input);
            auto& y = at(id).value;
            for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > S(0) ? x[i] : S(0);
        };
        at(id).forward(true);
        at(id).backward = [this, id, input]() {
            const auto& x = value(input);
            const auto& dy = at(id).grad;
            auto& dx = at(input).grad;
            for (size_t i = 0; i < x.size(); ++i)
                if (x[i] > S(0)) dx[i] += dy[i];  // subgradient at 0 is 0
        };
        return id;
    }

    int add(int a, int b) {
        if (!value(a).same_shape(value(b)))
            throw DimensionError("add: shape mismatch " + value(a).shape_str() + " vs " +
                                 value(b).shape_str());
        Node n;
        n.inputs = {a, b};
        n.value = value(a);
        int id = push(std::move(n));
        at(id).forward = [this, id, a, b](bool) {
            const auto& xa = value(a);
            const auto& xb = value(b);
            auto& y = at(id).value;
            for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
        };
        at(id).forward(true);
        at(id).backward = [this, id, a, b]() {
            const auto& dy = at(id).grad;
            auto& da = at(a).grad;
            auto& db = at(b).grad;
            for (size_t i = 0; i < dy.size(); ++i) {
                da[i] += dy[i];
                db[i] += dy[i];
            }
        };
        return id;
    }

    int mul(int a, int b) {
        if (!value(a).same_shape(value(b))) throw DimensionError("mul: shape mismatch");
        Node n;
        n.inputs = {a, b};
        n.value = value(a);
        int id = push(std::move(n));
        at(id).forward = [this, id, a, b](bool) {
            const auto& xa = value(a);
            const auto& xb = value(b);
            auto& y = at(id).value;
            for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
        };
        at(id).forward(true);
        at(id).backward = [this, id, a, b]() {
            const auto& dy = at(id).grad;
            const auto& xa = value(a);
            const auto& xb = value(b);
            auto& da = at(a).grad;
            auto& db = at(b).grad;
            for (size_t i = 0; i < dy.size(); ++i) {
                da[i] += dy[i] * xb[i];
                db[i] += dy[i] * xa[i];
            }
        };
        return id;
    }

    int sum(int input) {
        Node n;
        n.inputs = {input};
        n.value = Tensor<S>::scalar(S(0));
        int id = push(std::move(n));
        at(id).forward = [this, id, input](bool) {
            const auto& x = value(input);
            S s = 0;
            for (size_t i = 0; i < x.size(); ++i) s += x[i];
            at(id).value[0] = s;
        };
        at(id).forward(true);
        at(id).backward = [this, id, input]() {
            S dy = at(id).grad[0];
            auto& dx = at(input).grad;
            for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy;
        };
        return id;
    }

    // [B,T,C] -> [B,C] (or [T,C] -> [C]): mean over the time dimension.
    int global_avg_pool(int input) {
        const auto& x = value(input);
        auto [B, T, C] = btc(x);
        if (T < 1) throw DimensionError("global_avg_pool: empty time dimension");
        Node n;
        n.inputs = {input};
        n.value = x.rank() == 3 ? Tensor<S>({B, C}) : Tensor<S>({C});
        int id = push(std::move(n));
        at(id).forward = [this, id, input, B, T, C](bool) {
            const S* xp = value(input).data();
            S* y = at(id).value.data();
            std::fill(y, y + static_cast<size_t>(B) * C, S(0));
            for (int b = 0; b < B; ++b)
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < C; ++c) y[b * C + c] += xp[(b * T + t) * C + c];
            for (int i = 0; i < B * C; ++i) y[i] /= S(T);
        };
        at(id).forward(true);
        at(id).backward = [this, id, input, B, T, C]() {
            const S* dy = at(id).grad.data();
            S* dx = at(input).grad.data();
            for (int b = 0; b < B; ++b)
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < C; ++c)
                        dx[(b * T + t) * C + c] += dy[b * C + c] / S(T);
        };
        return id;
    }

    // input [B,C] or [C], weights [C,K], bias [K]
    int dense(int input, int weights, int bias) {
        const auto& x = value(input);
        const auto& w = value(weights);
        const int C = x.rank() == 2 ? x.dim(1) : x.dim(0);
        const int B = x.rank() == 2 ? x.dim(0) : 1;
        if (w.rank() != 2 || w.dim(0) != C) throw DimensionError("dense: weight shape mismatch");
        const int K = w.dim(1);
        if (value(bias).size() != static_cast<size_t>(K))
            throw DimensionError("dense: bias length mismatch");
        Node n;
        n.inputs = {input, weights, bias};
        n.value = x.rank() == 2 ? Tensor<S>({B, K}) : Tensor<S>({K});
        int id = push(std::move(n));
        at(id).forward = [this, id, input, weights, bias, B, C, K](bool) {
            CMapM X(value(input).data(), B, C);
            CMapM W(value(weights).data(), C, K);
            MapM Y(at(id).value.data(), B, K);
            Y.noalias() = X * W;
            Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bb(value(bias).data(), K);
            Y.rowwise() += bb.transpose();
        };
        at(id).forward(true);
        at(id).backward = [this, id, input, weights, bias, B, C, K]() {
            CMapM dY(at(id).grad.data(), B, K);
            CMapM X(value(input).data(), B, C);
            CMapM W(value(weights).data(), C, K);
            MapM dX(at(input).grad.data(), B, C);
            MapM dW(at(weights).grad.data(), C, K);
            dX.noalias() += dY * W.transpose();
            dW.noalias() += X.transpose() * dY;
            Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(at(bias).grad.data(), K);
            db += dY.colwise().sum().transpose();
        };
        return id;
    }

    struct LossAndProbs {
        int loss;   // scalar node, mean over the batch
        int probs;  // [B,K] (or [K]) softmax probabilities
    };

    // targets: one-hot rows, passed by value (labels are constants, not
    // differentiated through).
    LossAndProbs softmax_cross_entropy(int logits, const Tensor<S>& targets) {
        const auto& z = value(logits);
        if (!z.same_shape(targets))
            throw DimensionError("softmax_cross_entropy: logits/target shape mismatch");
        const int K = z.rank() == 2 ? z.dim(1) : z.dim(0);
        const int B = z.rank() == 2 ? z.dim(0) : 1;
        for (int b = 0; b < B; ++b) {
            int ones = 0;
            for (int k = 0; k < K; ++k) {
                S v = targets[b * K + k];
                if (v == S(1))
                    ++ones;
                else if (v != S(0))
                    throw DataError("softmax_cross_entropy: target is not one-hot");
            }
            if (ones != 1) throw DataError("softmax_cross_entropy: target is not one-hot");
        }

        Node pn;
        pn.inputs = {logits};
        pn.value = z;
        int probs = push(std::move(pn));
        at(probs).forward = [this, probs, logits, B, K](bool) {
            const S* zp = value(logits).data();
            S* p = at(probs).value.data();
            for (int b = 0; b < B; ++b) {
                S m = zp[b * K];
                for (int k = 1; k < K; ++k) m = std::max(m, zp[b * K + k]);
                S denom = 0;
                for (int k = 0; k < K; ++k) {
                    p[b * K + k] = std::exp(zp[b * K + k] - m);
                    denom += p[b * K + k];
                }
                for (int k = 0; k < K; ++k) p[b * K + k] /= denom;
            }
        };
        at(probs).forward(true);
        // softmax backward (used if a loss other than the paired xent consumes it)
        at(probs).backward = [this, probs, logits, B, K]() {
            const S* p = at(probs).value.data();
            const S* dy = at(probs).grad.data();
            S* dz = at(logits).grad.data();
            for (int b = 0; b < B; ++b) {
                S dot = 0;
                for (int k = 0; k < K; ++k) dot += dy[b * K + k] * p[b * K + k];
                for (int k = 0; k < K; ++k)
                    dz[b * K + k] += p[b * K + k] * (dy[b * K + k] - dot);
            }
        };

        Node ln;
        ln.inputs = {probs};
        ln.value = Tensor<S>::scalar(S(0));
        int loss = push(std::move(ln));
        auto tgt = std::make_shared<Tensor<S>>(targets);
        at(loss).forward = [this, loss, probs, tgt, B, K](bool) {
            const S* p = at(probs).value.data();
            S acc = 0;
            for (int b = 0; b < B; ++b)
                for (int k = 0; k < K; ++k)
                    if ((*tgt)[b * K + k] == S(1))
                        acc -= std::log(std::max(p[b * K + k], std::numeric_limits<S>::min()));
            at(loss).value[0] = acc / S(B);
        };
        at(loss).forward(true);
        // fused backward straight to the logits: d z = (p - y)/B
        at(loss).backward = [this, loss, probs, tgt, B, K]() {
            int logits = at(probs).inputs[0];
            S dl = at(loss).grad[0];
            const S* p = at(probs).value.data();
            S* dz = at(logits).grad.data();
            for (int i = 0; i < B * K; ++i)
                dz[i] += dl * (p[i] - (*tgt)[i]) / S(B);
        };
        return {loss, probs};
    }

    // --- differentiation --------------------------------------------------

    void backward(int loss_id) {
        const auto& lv = value(loss_id);
        if (lv.size() != 1) throw DimensionError("backward: loss must be a scalar");
        for (auto& n : nodes_) {
            n.grad = Tensor<S>(n.value.shape(), S(0));
        }
        nodes_[static_cast<size_t>(loss_id)].grad[0] = S(1);
        for (int i = loss_id; i >= 0; --i)
            if (nodes_[static_cast<size_t>(i)].backward) nodes_[static_cast<size_t>(i)].backward();
        ran_backward_ = true;
    }

    // d loss / d wrt for a leaf (network input or parameter).
    const Tensor<S>& input_gradient(int loss_id, int wrt) {
        if (wrt < 0 || wrt >= static_cast<int>(nodes_.size()) || !at(wrt).leaf)
            throw DataError("input_gradient: node is not a leaf of this tape");
        if (!ran_backward_) backward(loss_id);
        return at(wrt).grad;
    }

    // Re-execute every recorded forward; with unchanged leaves this must
    // reproduce all node values bit-exactly (running stats untouched).
    void replay() {
        for (auto& n : nodes_)
            if (n.forward) n.forward(false);
    }

private:
    Tensor<S> like(const Tensor<S>& x, int B, int T, int C) {
        return x.rank() == 3 ? Tensor<S>({B, T, C}) : Tensor<S>({T, C});
    }

    static std::tuple<int, int, int> btc(const Tensor<S>& x) {
        if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
        if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
        throw DimensionError("expected a [T,C] or [B,T,C] tensor, got " + x.shape_str());
    }

    static void im2col(const S* x, Mat& cols, int B, int T, int Cin, int k) {
        const int off = k / 2;
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) {
                S* row = cols.data() + static_cast<size_t>(b * T + t) * k * Cin;
                for (int j = 0; j < k; ++j) {
                    int src = t + j - off;
                    if (src < 0 || src >= T)
                        std::fill(row + j * Cin, row + (j + 1) * Cin, S(0));
                    else
                        std::copy(x + (static_cast<size_t>(b) * T + src) * Cin,
                                  x + (static_cast<size_t>(b) * T + src + 1) * Cin,
                                  row + j * Cin);
                }
            }
    }

    static void col2im_add(const Mat& dcols, S* dx, int B, int T, int Cin, int k) {
        const int off = k / 2;
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) {
                const S* row = dcols.data() + static_cast<size_t>(b * T + t) * k * Cin;
                for (int j = 0; j < k; ++j) {
                    int src = t + j - off;
                    if (src < 0 || src >= T) continue;
                    S* dst = dx + (static_cast<size_t>(b) * T + src) * Cin;
                    for (int c = 0; c < Cin; ++c) dst[c] += row[j * Cin + c];
                }
            }
    }

    Node& at(int id) { return nodes_.at(static_cast<size_t>(id)); }
    const Node& at(int id) const { return nodes_.at(static_cast<size_t>(id)); }
    int push(Node n) {
        nodes_.push_back(std::move(n));
        return last();
    }
    int last() const { return static_cast<int>(nodes_.size()) - 1; }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace tsadv
