#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/model.hpp"

namespace tsadv {

struct TrainConfig {
    int epochs = 1500;
    int batch_size = 16;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    bool shuffle = true;
    // Optional reduce-on-plateau: halve lr after 50 stagnant epochs, floor
    // 1e-4. Off by default.
    bool reduce_on_plateau = false;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    }
};

struct EpochRecord {
    double loss = 0;
    double accuracy = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    std::string to_csv() const {
        std::ostringstream os;
        os << "epoch,loss,accuracy,seconds\n";
        for (size_t i = 0; i < epochs.size(); ++i)
            os << (i + 1) << ',' << epochs[i].loss << ',' << epochs[i].accuracy << ','
               << epochs[i].seconds << '\n';
        return os.str();
    }
};

struct EvalResult {
    double accuracy = 0;
    std::vector<int> predictions;
    std::vector<std::vector<double>> probabilities;
};

namespace detail {

// Packs dataset rows into a [B,T,1] batch tensor plus one-hot targets.
template <typename S>
void pack_batch(const LabeledDataset& ds, const std::vector<int>& idx, size_t begin, size_t end,
                int num_classes, Tensor<S>& x, Tensor<S>& y) {
    const int B = static_cast<int>(end - begin);
    const int T = ds.length();
    x = Tensor<S>({B, T, 1});
    y = Tensor<S>({B, num_classes}, S(0));
    for (int b = 0; b < B; ++b) {
        const auto& inst = ds.instances[static_cast<size_t>(idx[begin + static_cast<size_t>(b)])];
        for (int t = 0; t < T; ++t) x[static_cast<size_t>(b * T + t)] = static_cast<S>(inst.values[static_cast<size_t>(t)]);
        y[static_cast<size_t>(b) * num_classes +
          static_cast<size_t>(ds.labels[static_cast<size_t>(idx[begin + static_cast<size_t>(b)])])] = S(1);
    }
}

}  // namespace detail

template <typename S>
struct AdamState {
    std::vector<std::vector<S>> m, v;
    long step = 0;

    explicit AdamState(const Model<S>& model) {
        for (const auto& p : model.params) {
            m.emplace_back(p.size(), S(0));
            v.emplace_back(p.size(), S(0));
        }
    }

    void update(Model<S>& model, const std::vector<const Tensor<S>*>& grads,
                const TrainConfig& cfg, double lr) {
        ++step;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (size_t i = 0; i < model.params.size(); ++i) {
            auto& p = model.params[i];
            const auto& g = *grads[i];
            for (size_t j = 0; j < p.size(); ++j) {
                double gj = static_cast<double>(g[j]);
                double mj = cfg.beta1 * static_cast<double>(m[i][j]) + (1 - cfg.beta1) * gj;
                double vj = cfg.beta2 * static_cast<double>(v[i][j]) + (1 - cfg.beta2) * gj * gj;
                m[i][j] = static_cast<S>(mj);
                v[i][j] = static_cast<S>(vj);
                p[j] -= static_cast<S>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.adam_eps));
            }
        }
    }
};

// Adam minimization of cross-entropy over shuffled mini-batches, BN in train
// mode. Deterministic given the seed on one platform. The last incomplete
// batch is used as-is.
template <typename S>
TrainHistory train(Model<S>& model, const LabeledDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.size() == 0) throw DataError("training dataset is empty");
    const int K = model.arch.num_classes;
    for (int l : ds.labels)
        if (l < 0 || l >= K) throw DataError("label index out of range for model classes");
    if (ds.length() != model.arch.input_length)
        throw DimensionError("dataset length does not match model input length");

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> idx(static_cast<size_t>(ds.size()));
    std::iota(idx.begin(), idx.end(), 0);
    AdamState<S> adam(model);
    TrainHistory hist;
    double lr = cfg.learning_rate;
    double best_loss = std::numeric_limits<double>::infinity();
    int stagnant = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        if (cfg.shuffle) std::shuffle(idx.begin(), idx.end(), rng);
        double loss_sum = 0;
        int correct = 0;
        for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(idx.size(), begin + static_cast<size_t>(cfg.batch_size));
            Tensor<S> x, y;
            detail::pack_batch(ds, idx, begin, end, K, x, y);
            const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " +
                                      std::to_string(begin / static_cast<size_t>(cfg.batch_size) + 1);
            if (!x.all_finite())
                throw NumericError("non-finite input value at " + where);
            GradientTape<S> tape;
            int in = tape.leaf(std::move(x));
            auto nodes = forward_network(model, tape, in, BnMode::Train);
            auto lp = tape.softmax_cross_entropy(nodes.logits, y);
            double batch_loss = static_cast<double>(tape.value(lp.loss)[0]);
            if (!std::isfinite(batch_loss))
                throw NumericError("training diverged: non-finite loss at " + where);
            const int B = static_cast<int>(end - begin);
            loss_sum += batch_loss * B;
            const auto& probs = tape.value(lp.probs);
            for (int b = 0; b < B; ++b) {
                int pred = argmax_class(probs.data() + static_cast<size_t>(b) * K, K);
                if (pred == ds.labels[static_cast<size_t>(idx[begin + static_cast<size_t>(b)])])
                    ++correct;
            }
            tape.backward(lp.loss);
            std::vector<const Tensor<S>*> grads;
            grads.reserve(model.params.size());
            for (int pid : nodes.param_nodes) grads.push_back(&tape.grad(pid));
            adam.update(model, grads, cfg, lr);
        }
        EpochRecord rec;
        rec.loss = loss_sum / ds.size();
        rec.accuracy = static_cast<double>(correct) / ds.size();
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        hist.epochs.push_back(rec);

        if (cfg.reduce_on_plateau) {
            if (rec.loss < best_loss - 1e-12) {
                best_loss = rec.loss;
                stagnant = 0;
            } else if (++stagnant >= 50) {
                lr = std::max(lr / 2, 1e-4);
                stagnant = 0;
            }
        }
    }
    model.meta.epochs += cfg.epochs;
    model.meta.final_train_loss = hist.epochs.back().loss;
    return hist;
}

// Fraction of instances whose argmax prediction equals the true label.
// Read-only on the model; repeated calls give identical results.
template <typename S>
EvalResult evaluate(Model<S>& model, const LabeledDataset& ds, int eval_batch = 64) {
    if (ds.size() == 0) throw DataError("evaluation dataset is empty");
    const int K = model.arch.num_classes;
    EvalResult res;
    std::vector<int> idx(static_cast<size_t>(ds.size()));
    std::iota(idx.begin(), idx.end(), 0);
    int correct = 0;
    for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(eval_batch)) {
        size_t end = std::min(idx.size(), begin + static_cast<size_t>(eval_batch));
        Tensor<S> x, y;
        detail::pack_batch(ds, idx, begin, end, K, x, y);
        GradientTape<S> tape;
        int in = tape.leaf(std::move(x));
        auto nodes = forward_network(model, tape, in, BnMode::Infer);
        auto lp = tape.softmax_cross_entropy(nodes.logits, y);
        const auto& probs = tape.value(lp.probs);
        const int B = static_cast<int>(end - begin);
        for (int b = 0; b < B; ++b) {
            const S* row = probs.data() + static_cast<size_t>(b) * K;
            int pred = argmax_class(row, K);
            res.predictions.push_back(pred);
            std::vector<double> prow(static_cast<size_t>(K));
            for (int k = 0; k < K; ++k) prow[static_cast<size_t>(k)] = static_cast<double>(row[k]);
            res.probabilities.push_back(std::move(prow));
            if (pred == ds.labels[begin + static_cast<size_t>(b)]) ++correct;
        }
    }
    res.accuracy = static_cast<double>(correct) / ds.size();
    return res;
}

}  // namespace tsadv
