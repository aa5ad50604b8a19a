#include <benchmark/benchmark.h>

#include "tsadv/attack.hpp"

namespace {

void BM_Fgsm(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    auto model = tsadv::build_resnet<float>(T, 2, 42);
    tsadv::TimeSeries s;
    for (int t = 0; t < T; ++t) s.values.push_back(std::sin(0.3 * t));
    for (auto _ : state) {
        auto r = tsadv::fgsm(model, s, 0.1);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_Fgsm)->Arg(24)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Bim(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    auto model = tsadv::build_resnet<float>(T, 2, 42);
    tsadv::TimeSeries s;
    for (int t = 0; t < T; ++t) s.values.push_back(std::sin(0.3 * t));
    auto cfg = tsadv::AttackConfig::bim_default(0.1);
    for (auto _ : state) {
        auto r = tsadv::bim(model, s, cfg);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_Bim)->Arg(24)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
