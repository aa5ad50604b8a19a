#include <benchmark/benchmark.h>

#include <random>

#include "tsadv/analysis.hpp"

namespace {

void BM_SmacofMds(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::vector<double>> vecs;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(128);
        for (auto& x : v) x = u(rng);
        vecs.push_back(std::move(v));
    }
    auto dist = tsadv::pairwise_euclidean(vecs);
    for (auto _ : state) {
        auto emb = tsadv::smacof_mds(dist);
        benchmark::DoNotOptimize(emb);
    }
}
BENCHMARK(BM_SmacofMds)->Arg(56)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
