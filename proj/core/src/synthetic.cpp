#include "tsadv/synthetic.hpp"

#include <cmath>
#include <random>

#include "tsadv/errors.hpp"

namespace tsadv {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> class_waveform(const SyntheticSpec& spec, int cls, double phase,
                                   double amp, std::mt19937_64& rng) {
    const int T = spec.length;
    std::vector<double> v(static_cast<size_t>(T));
    // class-specific frequencies and bump location, spread apart by class_spread
    double f1 = 2.0 + spec.class_spread * cls;
    double f2 = 5.0 + spec.class_spread * 1.7 * cls;
    double bump_center = (0.2 + 0.6 * cls / std::max(1, spec.num_classes - 1));
    double bump_sign = (cls % 2 == 0) ? 1.0 : -1.0;
    std::normal_distribution<double> noise(0.0, spec.noise);
    for (int t = 0; t < T; ++t) {
        double u = static_cast<double>(t) / T;
        double base = std::sin(2 * kPi * f1 * u + phase) +
                      0.6 * std::sin(2 * kPi * f2 * u + 1.3 * phase);
        double db = (u - bump_center) / 0.08;
        base += bump_sign * spec.class_spread * std::exp(-db * db);
        v[static_cast<size_t>(t)] = amp * base + noise(rng);
    }
    return v;
}

LabeledDataset make_split(const SyntheticSpec& spec, int n, Split split, std::mt19937_64& rng) {
    LabeledDataset ds;
    ds.name = spec.name;
    ds.split = split;
    for (int c = 0; c < spec.num_classes; ++c) ds.class_map[std::to_string(c + 1)] = c;
    std::normal_distribution<double> phase(0.0, spec.phase_jitter);
    std::normal_distribution<double> amp(1.0, spec.amp_jitter);
    for (int i = 0; i < n; ++i) {
        int cls = i % spec.num_classes;  // balanced
        auto values = class_waveform(spec, cls, phase(rng), amp(rng), rng);
        ds.instances.push_back(TimeSeries{z_normalize(values)});
        ds.labels.push_back(cls);
    }
    return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> make_synthetic(const SyntheticSpec& spec,
                                                         uint64_t seed) {
    if (spec.num_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
    if (spec.length < 8) throw ConfigError("synthetic series length must be >= 8");
    if (spec.train_size < spec.num_classes || spec.test_size < spec.num_classes)
        throw ConfigError("synthetic split sizes must cover every class");
    std::mt19937_64 rng(seed);
    auto train = make_split(spec, spec.train_size, Split::Train, rng);
    auto test = make_split(spec, spec.test_size, Split::Test, rng);
    return {std::move(train), std::move(test)};
}

SyntheticSpec synthetic_preset(const std::string& name) {
    SyntheticSpec s;
    s.name = name;
    if (name == "coffee") {
        s.num_classes = 2;
        s.length = 96;
        s.train_size = 28;
        s.test_size = 28;
        s.noise = 0.25;
        s.class_spread = 0.14;
    } else if (name == "ham") {
        s.num_classes = 2;
        s.length = 128;
        s.train_size = 60;
        s.test_size = 60;
        s.noise = 0.45;
        s.phase_jitter = 0.45;
        s.class_spread = 0.22;
    } else if (name == "beef") {
        s.num_classes = 5;
        s.length = 96;
        s.train_size = 30;
        s.test_size = 30;
        s.noise = 0.35;
        s.phase_jitter = 0.35;
        s.class_spread = 0.30;
    } else if (name == "italypowerdemand") {
        s.num_classes = 2;
        s.length = 24;
        s.train_size = 67;
        s.test_size = 200;
        s.noise = 0.25;
        s.class_spread = 0.15;
    } else if (name == "twoleadecg") {
        s.num_classes = 2;
        s.length = 82;
        s.train_size = 24;
        s.test_size = 100;
        s.noise = 0.3;
        s.class_spread = 0.20;
    } else {
        throw ConfigError("unknown synthetic preset '" + name + "'");
    }
    return s;
}

std::vector<std::string> synthetic_preset_names() {
    return {"coffee", "ham", "beef", "italypowerdemand", "twoleadecg"};
}

}  // namespace tsadv
