#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/tape.hpp"
#include "tsadv/tensor.hpp"

namespace tsadv {

enum class ArchKind { ResNet, Fcn };

inline std::string arch_name(ArchKind k) { return k == ArchKind::ResNet ? "resnet" : "fcn"; }

inline ArchKind arch_from_name(const std::string& s) {
    if (s == "resnet") return ArchKind::ResNet;
    if (s == "fcn") return ArchKind::Fcn;
    throw ConfigError("unknown architecture '" + s + "' (expected resnet or fcn)");
}

struct ModelArchitecture {
    ArchKind kind = ArchKind::ResNet;
    int input_length = 0;
    int num_classes = 0;
};

struct TrainMeta {
    int epochs = 0;
    uint64_t seed = 0;
    double final_train_loss = 0.0;
};

// ResNet: three residual blocks of three convolutions (kernel lengths 8/5/3,
// filter plan 64/128/128), each conv followed by BN then ReLU; the shortcut is
// added after the block's last BN, before the final ReLU. FCN: three
// conv+BN+ReLU layers (128/256/128 filters, kernels 8/5/3). Both end in
// GAP -> dense -> softmax. Parameter shapes do not depend on input_length.
template <typename S>
struct Model {
    ModelArchitecture arch;
    std::vector<std::string> param_names;          // checkpoint manifest order
    std::vector<Tensor<S>> params;                 // parallel to param_names
    std::vector<std::string> bn_names;
    std::vector<BatchNormState<S>> bn_states;
    TrainMeta meta;

    int param_id(const std::string& name) const {
        for (size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == name) return static_cast<int>(i);
        throw DataError("unknown parameter " + name);
    }
    Tensor<S>& param(const std::string& name) { return params[param_id(name)]; }
    const Tensor<S>& param(const std::string& name) const { return params[param_id(name)]; }
    size_t num_scalars() const {
        size_t n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }
};

namespace detail {

template <typename S>
class ModelBuilder {
public:
    explicit ModelBuilder(uint64_t seed) : rng_(seed) {}

    void conv(Model<S>& m, const std::string& name, int k, int cin, int cout) {
        S limit = static_cast<S>(std::sqrt(6.0 / (k * cin + k * cout)));
        add(m, name + ".kernel", uniform({k, cin, cout}, limit));
        add(m, name + ".bias", Tensor<S>({cout}, S(0)));
    }
    void bn(Model<S>& m, const std::string& name, int c) {
        add(m, name + ".gamma", Tensor<S>({c}, S(1)));
        add(m, name + ".beta", Tensor<S>({c}, S(0)));
        BatchNormState<S> st;
        st.running_mean.assign(static_cast<size_t>(c), S(0));
        st.running_var.assign(static_cast<size_t>(c), S(1));
        st.initialized = true;
        m.bn_names.push_back(name);
        m.bn_states.push_back(std::move(st));
    }
    void fc(Model<S>& m, const std::string& name, int cin, int cout) {
        S limit = static_cast<S>(std::sqrt(6.0 / (cin + cout)));
        add(m, name + ".weight", uniform({cin, cout}, limit));
        add(m, name + ".bias", Tensor<S>({cout}, S(0)));
    }

private:
    void add(Model<S>& m, const std::string& name, Tensor<S> t) {
        m.param_names.push_back(name);
        m.params.push_back(std::move(t));
    }
    Tensor<S> uniform(std::vector<int> shape, S limit) {
        Tensor<S> t(std::move(shape));
        std::uniform_real_distribution<double> dist(-static_cast<double>(limit),
                                                    static_cast<double>(limit));
        for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(dist(rng_));
        return t;
    }
    std::mt19937_64 rng_;
};

}  // namespace detail

template <typename S>
Model<S> build_resnet(int input_length, int num_classes, uint64_t seed) {
    if (input_length < 1) throw ConfigError("input_length must be positive");
    if (num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
    Model<S> m;
    m.arch = {ArchKind::ResNet, input_length, num_classes};
    m.meta.seed = seed;
    detail::ModelBuilder<S> b(seed);
    const int filters[3] = {64, 128, 128};
    const int klen[3] = {8, 5, 3};
    int cin = 1;
    for (int blk = 0; blk < 3; ++blk) {
        const std::string p = "block" + std::to_string(blk);
        int cout = filters[blk];
        int c = cin;
        for (int i = 0; i < 3; ++i) {
            b.conv(m, p + ".conv" + std::to_string(i), klen[i], c, cout);
            b.bn(m, p + ".bn" + std::to_string(i), cout);
            c = cout;
        }
        if (cin != cout) {
            b.conv(m, p + ".shortcut", 1, cin, cout);
            b.bn(m, p + ".shortcut_bn", cout);
        }
        cin = cout;
    }
    b.fc(m, "fc", 128, num_classes);
    return m;
}

template <typename S>
Model<S> build_fcn(int input_length, int num_classes, uint64_t seed) {
    if (input_length < 1) throw ConfigError("input_length must be positive");
    if (num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
    Model<S> m;
    m.arch = {ArchKind::Fcn, input_length, num_classes};
    m.meta.seed = seed;
    detail::ModelBuilder<S> b(seed);
    const int filters[3] = {128, 256, 128};
    const int klen[3] = {8, 5, 3};
    int cin = 1;
    for (int i = 0; i < 3; ++i) {
        b.conv(m, "conv" + std::to_string(i), klen[i], cin, filters[i]);
        b.bn(m, "bn" + std::to_string(i), filters[i]);
        cin = filters[i];
    }
    b.fc(m, "fc", 128, num_classes);
    return m;
}

template <typename S>
Model<S> build_model(ArchKind kind, int input_length, int num_classes, uint64_t seed) {
    return kind == ArchKind::ResNet ? build_resnet<S>(input_length, num_classes, seed)
                                    : build_fcn<S>(input_length, num_classes, seed);
}

// Nodes of interest from one recorded forward pass.
struct ForwardNodes {
    int input = -1;
    int gap = -1;
    int logits = -1;
    std::vector<int> param_nodes;  // parallel to model.params
};

// Records the full network onto `tape`. `input_id` must hold a [T,1] or
// [B,T,1] tensor already on the tape.
template <typename S>
ForwardNodes forward_network(Model<S>& model, GradientTape<S>& tape, int input_id, BnMode mode) {
    ForwardNodes out;
    out.input = input_id;
    out.param_nodes.reserve(model.params.size());
    for (auto& p : model.params) out.param_nodes.push_back(tape.leaf(p));
    auto pid = [&](const std::string& name) { return out.param_nodes[model.param_id(name)]; };
    auto bn_state = [&](const std::string& name) -> BatchNormState<S>* {
        for (size_t i = 0; i < model.bn_names.size(); ++i)
            if (model.bn_names[i] == name) return &model.bn_states[i];
        throw DataError("unknown batch norm state " + name);
    };
    int x = input_id;
    if (model.arch.kind == ArchKind::ResNet) {
        const int filters[3] = {64, 128, 128};
        int cin = 1;
        for (int blk = 0; blk < 3; ++blk) {
            const std::string p = "block" + std::to_string(blk);
            int shortcut = x;
            if (cin != filters[blk]) {
                shortcut = tape.conv1d(x, pid(p + ".shortcut.kernel"), pid(p + ".shortcut.bias"));
                shortcut = tape.batch_norm(shortcut, pid(p + ".shortcut_bn.gamma"),
                                           pid(p + ".shortcut_bn.beta"),
                                           bn_state(p + ".shortcut_bn"), mode);
            }
            for (int i = 0; i < 3; ++i) {
                const std::string c = p + ".conv" + std::to_string(i);
                const std::string bn = p + ".bn" + std::to_string(i);
                x = tape.conv1d(x, pid(c + ".kernel"), pid(c + ".bias"));
                x = tape.batch_norm(x, pid(bn + ".gamma"), pid(bn + ".beta"), bn_state(bn), mode);
                if (i < 2) x = tape.relu(x);
            }
            x = tape.relu(tape.add(x, shortcut));
            cin = filters[blk];
        }
    } else {
        for (int i = 0; i < 3; ++i) {
            const std::string c = "conv" + std::to_string(i);
            const std::string bn = "bn" + std::to_string(i);
            x = tape.conv1d(x, pid(c + ".kernel"), pid(c + ".bias"));
            x = tape.batch_norm(x, pid(bn + ".gamma"), pid(bn + ".beta"), bn_state(bn), mode);
            x = tape.relu(x);
        }
    }
    out.gap = tape.global_avg_pool(x);
    out.logits = tape.dense(out.gap, pid("fc.weight"), pid("fc.bias"));
    return out;
}

template <typename S>
Tensor<S> series_tensor(const Model<S>& model, const TimeSeries& series) {
    if (series.length() != model.arch.input_length)
        throw DimensionError("series length " + std::to_string(series.length()) +
                             " does not match model input length " +
                             std::to_string(model.arch.input_length));
    Tensor<S> t({series.length(), 1});
    for (int i = 0; i < series.length(); ++i) t[i] = static_cast<S>(series.values[i]);
    return t;
}

template <typename S>
int argmax_class(const S* p, int k) {
    int best = 0;
    for (int i = 1; i < k; ++i)
        if (p[i] > p[best]) best = i;  // ties keep the lowest index
    return best;
}

// Class probabilities (BN in inference mode). Softmax guarantees a
// nonnegative vector summing to 1.
template <typename S>
std::vector<S> predict(Model<S>& model, const TimeSeries& series) {
    GradientTape<S> tape;
    int in = tape.leaf(series_tensor(model, series));
    auto nodes = forward_network(model, tape, in, BnMode::Infer);
    const auto& logits = tape.value(nodes.logits);
    Tensor<S> onehot(logits.shape(), S(0));
    onehot[0] = S(1);  // dummy target; only the probs output is read
    auto lp = tape.softmax_cross_entropy(nodes.logits, onehot);
    return tape.value(lp.probs).to_std();
}

template <typename S>
int predict_class(Model<S>& model, const TimeSeries& series) {
    auto p = predict(model, series);
    return argmax_class(p.data(), static_cast<int>(p.size()));
}

// GAP-layer activations: the 128-value latent vector feeding the softmax.
template <typename S>
std::vector<S> gap_features(Model<S>& model, const TimeSeries& series) {
    GradientTape<S> tape;
    int in = tape.leaf(series_tensor(model, series));
    auto nodes = forward_network(model, tape, in, BnMode::Infer);
    return tape.value(nodes.gap).to_std();
}

}  // namespace tsadv
