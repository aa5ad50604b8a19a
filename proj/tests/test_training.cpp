#include <cmath>

#include "doctest.h"
#include "tsadv/synthetic.hpp"
#include "tsadv/train.hpp"

using namespace tsadv;

namespace {

LabeledDataset tiny_dataset(int n, int length, int classes, uint64_t seed) {
    SyntheticSpec spec;
    spec.length = length;
    spec.num_classes = classes;
    spec.train_size = n;
    spec.test_size = classes;
    spec.noise = 0.2;
    return make_synthetic(spec, seed).first;
}

}  // namespace

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.learning_rate = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("single instance is memorized") {
    LabeledDataset ds;
    ds.name = "one";
    ds.class_map = {{"1", 0}, {"2", 1}};
    TimeSeries s;
    for (int t = 0; t < 16; ++t) s.values.push_back(std::sin(0.5 * t));
    ds.instances.push_back(TimeSeries{z_normalize(s.values)});
    ds.labels.push_back(0);
    auto model = build_resnet<float>(16, 2, 5);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 1;
    auto hist = train(model, ds, cfg);
    REQUIRE(hist.epochs.size() == 200);
    CHECK(hist.epochs.back().loss < 1e-2);
}

TEST_CASE("same seed reproduces the final loss exactly") {
    auto ds = tiny_dataset(8, 16, 2, 11);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 77;
    auto m1 = build_resnet<float>(16, 2, 9);
    auto m2 = build_resnet<float>(16, 2, 9);
    auto h1 = train(m1, ds, cfg);
    auto h2 = train(m2, ds, cfg);
    CHECK(h1.epochs.back().loss == h2.epochs.back().loss);
    for (size_t i = 0; i < m1.params.size(); ++i)
        CHECK(m1.params[i].vec() == m2.params[i].vec());
}

TEST_CASE("an easy dataset trains to high accuracy quickly") {
    auto ds = tiny_dataset(16, 32, 2, 21);
    auto model = build_resnet<float>(32, 2, 13);
    TrainConfig cfg;
    // enough updates for the batch-norm running averages (momentum 0.99) to
    // settle; inference accuracy lags training accuracy until they do
    cfg.epochs = 300;
    cfg.seed = 2;
    auto hist = train(model, ds, cfg);
    auto ev = evaluate(model, ds);
    CHECK(ev.accuracy >= 0.9);
    CHECK(hist.epochs.back().loss < hist.epochs.front().loss);
}

TEST_CASE("evaluate on a constant-class model") {
    auto model = build_resnet<float>(16, 3, 5);
    // zero the dense layer and bias toward class 2: prediction is constant
    auto& w = model.param("fc.weight");
    for (size_t i = 0; i < w.size(); ++i) w[i] = 0.0f;
    auto& b = model.param("fc.bias");
    b[0] = 0.0f;
    b[1] = 0.0f;
    b[2] = 5.0f;

    auto ds = tiny_dataset(9, 16, 3, 31);
    for (auto& l : ds.labels) l = 2;
    CHECK(evaluate(model, ds).accuracy == 1.0);
    for (auto& l : ds.labels) l = 0;  // empty intersection
    CHECK(evaluate(model, ds).accuracy == 0.0);
}

TEST_CASE("untrained model is near chance on a balanced set") {
    auto ds = tiny_dataset(200, 24, 2, 41);
    auto model = build_resnet<float>(24, 2, 1234);
    auto ev = evaluate(model, ds);
    CHECK(ev.accuracy == doctest::Approx(0.5).epsilon(0.31));  // 1/K +- 0.15
}

TEST_CASE("evaluate is pure") {
    auto ds = tiny_dataset(10, 16, 2, 51);
    auto model = build_resnet<float>(16, 2, 3);
    auto a = evaluate(model, ds);
    auto b = evaluate(model, ds);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.predictions == b.predictions);
}

TEST_CASE("soft loss monotonicity with a fixed batch order") {
    auto ds = tiny_dataset(8, 16, 2, 61);
    auto model = build_resnet<float>(16, 2, 7);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.shuffle = false;
    cfg.seed = 4;
    auto hist = train(model, ds, cfg);
    int windows = 0, decreasing = 0;
    for (size_t start = 0; start + 100 < hist.epochs.size(); ++start) {
        ++windows;
        if (hist.epochs[start + 100].loss <= hist.epochs[start].loss + 1e-9) ++decreasing;
    }
    REQUIRE(windows > 0);
    CHECK(static_cast<double>(decreasing) / windows >= 0.9);
}

TEST_CASE("non-finite training data aborts with epoch and batch diagnostics") {
    auto ds = tiny_dataset(4, 16, 2, 71);
    ds.instances[2].values[5] = std::numeric_limits<double>::quiet_NaN();
    auto model = build_resnet<float>(16, 2, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.shuffle = false;
    try {
        train(model, ds, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("batch") != std::string::npos);
    }
}

TEST_CASE("history exports as CSV") {
    TrainHistory h;
    h.epochs.push_back({0.5, 0.75, 1.25});
    h.epochs.push_back({0.25, 0.9, 1.5});
    auto csv = h.to_csv();
    CHECK(csv.find("epoch,loss,accuracy,seconds\n") == 0);
    CHECK(csv.find("1,0.5,0.75,1.25\n") != std::string::npos);
    CHECK(csv.find("2,0.25,0.9,1.5\n") != std::string::npos);
}

TEST_CASE("labels out of range are rejected") {
    auto ds = tiny_dataset(4, 16, 2, 81);
    ds.labels[1] = 7;
    auto model = build_resnet<float>(16, 2, 5);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(model, ds, cfg), DataError);
}
