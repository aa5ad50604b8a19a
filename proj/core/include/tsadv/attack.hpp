#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/model.hpp"
#include "tsadv/train.hpp"

namespace tsadv {

enum class AttackMethod { Fgsm, Bim };

inline std::string method_name(AttackMethod m) { return m == AttackMethod::Fgsm ? "fgsm" : "bim"; }

inline AttackMethod method_from_name(const std::string& s) {
    if (s == "fgsm") return AttackMethod::Fgsm;
    if (s == "bim") return AttackMethod::Bim;
    throw ConfigError("unknown attack method '" + s + "' (expected fgsm or bim)");
}

struct AttackConfig {
    AttackMethod method = AttackMethod::Fgsm;
    double epsilon = 0.1;
    double alpha = 0.01;    // per-step size, bim only
    int iterations = 10;    // bim only
    // Re-predict the crafting label each iteration instead of fixing it to
    // the prediction on the original series. Off by default.
    bool recompute_label = false;

    static AttackConfig fgsm_default(double eps) {
        AttackConfig c;
        c.method = AttackMethod::Fgsm;
        c.epsilon = eps;
        return c;
    }
    static AttackConfig bim_default(double eps) {
        AttackConfig c;
        c.method = AttackMethod::Bim;
        c.epsilon = eps;
        c.alpha = eps / 10.0;
        c.iterations = 10;
        return c;
    }

    void validate() const {
        if (epsilon < 0) throw ConfigError("epsilon must be >= 0");
        if (method == AttackMethod::Bim && epsilon > 0) {
            if (alpha <= 0) throw ConfigError("alpha must be positive");
            if (alpha > epsilon) throw ConfigError("alpha must not exceed epsilon");
            if (iterations < 1) throw ConfigError("iterations must be >= 1");
        }
    }
};

struct AttackResult {
    TimeSeries original;
    TimeSeries perturbed;
    std::vector<double> eta;  // perturbed - original, ||eta||_inf <= epsilon
    int craft_label = 0;      // model's prediction on the original series
    int prediction_before = 0;
    int prediction_after = 0;
    double confidence_before = 0;
    double confidence_after = 0;
    bool success = false;  // prediction changed
};

// d loss(X, label) / dX with BN in inference mode.
template <typename S>
std::vector<S> loss_input_gradient(Model<S>& model, const std::vector<double>& values,
                                   int label) {
    TimeSeries series{values};
    GradientTape<S> tape;
    int in = tape.leaf(series_tensor(model, series));
    auto nodes = forward_network(model, tape, in, BnMode::Infer);
    Tensor<S> onehot({model.arch.num_classes}, S(0));
    onehot[static_cast<size_t>(label)] = S(1);
    auto lp = tape.softmax_cross_entropy(nodes.logits, onehot);
    tape.backward(lp.loss);
    return tape.input_gradient(lp.loss, in).to_std();
}

template <typename S>
inline S sign_of(S v) {
    return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0));
}

// One-step gradient-sign perturbation: eta = epsilon * sign(d J(X, Yhat) / dX)
// with Yhat the model's own prediction on X.
template <typename S>
AttackResult fgsm(Model<S>& model, const TimeSeries& series, double epsilon) {
    if (epsilon < 0) throw ConfigError("epsilon must be >= 0");
    AttackResult res;
    res.original = series;
    auto p0 = predict(model, series);
    res.craft_label = argmax_class(p0.data(), static_cast<int>(p0.size()));
    res.prediction_before = res.craft_label;
    res.confidence_before = static_cast<double>(p0[static_cast<size_t>(res.craft_label)]);

    res.perturbed = series;  // epsilon 0 is an exact no-op
    res.eta.assign(series.values.size(), 0.0);
    if (epsilon > 0) {
        auto grad = loss_input_gradient(model, series.values, res.craft_label);
        for (size_t i = 0; i < series.values.size(); ++i) {
            S eta = static_cast<S>(epsilon) * sign_of(grad[i]);
            res.eta[i] = static_cast<double>(eta);
            res.perturbed.values[i] = static_cast<double>(static_cast<S>(series.values[i]) + eta);
        }
    }
    auto p1 = predict(model, res.perturbed);
    res.prediction_after = argmax_class(p1.data(), static_cast<int>(p1.size()));
    res.confidence_after = static_cast<double>(p1[static_cast<size_t>(res.prediction_after)]);
    res.success = res.prediction_after != res.prediction_before;
    return res;
}

// Iterative gradient-sign attack: I steps of size alpha, each followed by a
// clip back into the epsilon-ball around the original series.
template <typename S>
AttackResult bim(Model<S>& model, const TimeSeries& series, const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.method = AttackMethod::Bim;
    c.validate();
    AttackResult res;
    res.original = series;
    auto p0 = predict(model, series);
    res.craft_label = argmax_class(p0.data(), static_cast<int>(p0.size()));
    res.prediction_before = res.craft_label;
    res.confidence_before = static_cast<double>(p0[static_cast<size_t>(res.craft_label)]);

    const size_t T = series.values.size();
    res.perturbed = series;  // epsilon 0 is an exact no-op
    res.eta.assign(T, 0.0);
    std::vector<S> x(T), cur(T);
    for (size_t i = 0; i < T; ++i) cur[i] = x[i] = static_cast<S>(series.values[i]);
    if (c.epsilon > 0) {
        int label = res.craft_label;
        std::vector<double> cur_d(T);
        for (int it = 0; it < c.iterations; ++it) {
            for (size_t i = 0; i < T; ++i) cur_d[i] = static_cast<double>(cur[i]);
            if (c.recompute_label) label = predict_class(model, TimeSeries{cur_d});
            auto grad = loss_input_gradient(model, cur_d, label);
            for (size_t i = 0; i < T; ++i) {
                cur[i] += static_cast<S>(c.alpha) * sign_of(grad[i]);
                S lo = x[i] - static_cast<S>(c.epsilon);
                S hi = x[i] + static_cast<S>(c.epsilon);
                cur[i] = std::min(hi, std::max(lo, cur[i]));
            }
        }
        for (size_t i = 0; i < T; ++i) {
            res.perturbed.values[i] = static_cast<double>(cur[i]);
            res.eta[i] = static_cast<double>(cur[i] - x[i]);
        }
    }
    auto p1 = predict(model, res.perturbed);
    res.prediction_after = argmax_class(p1.data(), static_cast<int>(p1.size()));
    res.confidence_after = static_cast<double>(p1[static_cast<size_t>(res.prediction_after)]);
    res.success = res.prediction_after != res.prediction_before;
    return res;
}

template <typename S>
AttackResult attack_one(Model<S>& model, const TimeSeries& series, const AttackConfig& cfg) {
    return cfg.method == AttackMethod::Fgsm ? fgsm(model, series, cfg.epsilon)
                                            : bim(model, series, cfg);
}

// Label-free core: perturbs every series using only the model's own
// predictions. True labels never enter here.
template <typename S>
std::vector<AttackResult> attack_series_set(Model<S>& model,
                                            const std::vector<TimeSeries>& series,
                                            const AttackConfig& cfg) {
    cfg.validate();
    std::vector<AttackResult> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back(attack_one(model, s, cfg));
    return out;
}

struct AttackCampaign {
    std::string dataset;
    AttackConfig config;
    double original_accuracy = 0;
    double attacked_accuracy = 0;
    double accuracy_variation = 0;  // original - attacked
    std::vector<AttackResult> results;
    LabeledDataset perturbed;  // same labels/class map, perturbed values
};

// Full test-set campaign. Crafting touches only model predictions; the true
// labels are used solely for the accuracy metrics.
template <typename S>
AttackCampaign attack_dataset(Model<S>& model, const LabeledDataset& test_set,
                              const AttackConfig& cfg) {
    if (test_set.size() == 0) throw DataError("attack: test set is empty");
    AttackCampaign camp;
    camp.dataset = test_set.name;
    camp.config = cfg;
    camp.results = attack_series_set(model, test_set.instances, cfg);

    camp.perturbed = test_set;
    for (int i = 0; i < test_set.size(); ++i)
        camp.perturbed.instances[static_cast<size_t>(i)] =
            camp.results[static_cast<size_t>(i)].perturbed;

    int orig_ok = 0, adv_ok = 0;
    for (int i = 0; i < test_set.size(); ++i) {
        const auto& r = camp.results[static_cast<size_t>(i)];
        if (r.prediction_before == test_set.labels[static_cast<size_t>(i)]) ++orig_ok;
        if (r.prediction_after == test_set.labels[static_cast<size_t>(i)]) ++adv_ok;
    }
    camp.original_accuracy = static_cast<double>(orig_ok) / test_set.size();
    camp.attacked_accuracy = static_cast<double>(adv_ok) / test_set.size();
    camp.accuracy_variation = camp.original_accuracy - camp.attacked_accuracy;
    return camp;
}

struct SweepPoint {
    double epsilon = 0;
    double attacked_accuracy = 0;
};

struct SweepResult {
    AttackMethod method = AttackMethod::Fgsm;
    std::vector<SweepPoint> points;
    std::vector<AttackCampaign> campaigns;
};

// One campaign per epsilon; for BIM, alpha rescales as epsilon/10.
template <typename S>
SweepResult epsilon_sweep(Model<S>& model, const LabeledDataset& test_set, AttackMethod method,
                          const std::vector<double>& epsilons) {
    if (epsilons.empty()) throw ConfigError("epsilon sweep needs at least one value");
    for (size_t i = 0; i < epsilons.size(); ++i) {
        if (epsilons[i] < 0) throw ConfigError("sweep epsilons must be >= 0");
        if (i > 0 && epsilons[i] < epsilons[i - 1])
            throw ConfigError("sweep epsilons must be sorted ascending");
    }
    SweepResult sweep;
    sweep.method = method;
    for (double eps : epsilons) {
        AttackConfig cfg = method == AttackMethod::Fgsm ? AttackConfig::fgsm_default(eps)
                                                        : AttackConfig::bim_default(eps);
        auto camp = attack_dataset(model, test_set, cfg);
        sweep.points.push_back({eps, camp.attacked_accuracy});
        sweep.campaigns.push_back(std::move(camp));
    }
    return sweep;
}

struct TransferResult {
    double original_accuracy = 0;     // target model on the clean set
    double adversarial_accuracy = 0;  // target model on the crafted set
    double drop = 0;
};

// Black-box evaluation: adversarial set crafted against a different (source)
// model, classified by the target.
template <typename S>
TransferResult transfer_evaluate(Model<S>& target, const LabeledDataset& adversarial,
                                 const LabeledDataset& clean) {
    if (adversarial.length() != target.arch.input_length)
        throw DataError("transfer: series length does not match target model");
    if (adversarial.num_classes() > target.arch.num_classes)
        throw DataError("transfer: class count exceeds target model classes");
    if (adversarial.size() != clean.size())
        throw DataError("transfer: adversarial and clean sets differ in size");
    TransferResult res;
    res.original_accuracy = evaluate(target, clean).accuracy;
    res.adversarial_accuracy = evaluate(target, adversarial).accuracy;
    res.drop = res.original_accuracy - res.adversarial_accuracy;
    return res;
}

}  // namespace tsadv
