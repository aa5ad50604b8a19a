#include <benchmark/benchmark.h>

#include "tsadv/model.hpp"
#include "tsadv/train.hpp"
#include "tsadv/synthetic.hpp"

namespace {

// One inference forward pass, batch 1.
void BM_ResNetPredict(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    auto model = tsadv::build_resnet<float>(T, 2, 42);
    tsadv::TimeSeries s;
    s.values.assign(static_cast<size_t>(T), 0.5);
    for (auto _ : state) {
        auto p = tsadv::predict(model, s);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(BM_ResNetPredict)->Arg(24)->Arg(128)->Arg(286);

// One training step (forward + backward + Adam) at batch 16.
void BM_ResNetTrainStep(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    tsadv::SyntheticSpec spec;
    spec.length = T;
    spec.train_size = 16;
    spec.test_size = 2;
    auto [train_ds, test_ds] = tsadv::make_synthetic(spec, 7);
    auto model = tsadv::build_resnet<float>(T, 2, 42);
    tsadv::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    for (auto _ : state) {
        auto hist = tsadv::train(model, train_ds, cfg);
        benchmark::DoNotOptimize(hist);
    }
}
BENCHMARK(BM_ResNetTrainStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
