#include <benchmark/benchmark.h>

#include "geoprobe/pooling.hpp"
#include "geoprobe/reference.hpp"
#include "geoprobe/rng.hpp"
#include "geoprobe/stats.hpp"

namespace {

using namespace geoprobe;

FeatureTensor random_tensor(std::size_t n, std::size_t t, std::size_t d) {
    FeatureTensor f(n, t, d);
    CounterRng rng(derive_key(7, {n, t, d}));
    for (auto& v : f.values) v = rng.normal();
    return f;
}

void BM_MeanPoolParallel(benchmark::State& state) {
    const auto f = random_tensor(static_cast<std::size_t>(state.range(0)), 197, 384);
    const MaskGrid masks(f.n, TokenMask::excluding_leading(f.t, 1));
    for (auto _ : state) benchmark::DoNotOptimize(mean_pool(f, masks));
}

void BM_MeanPoolSerial(benchmark::State& state) {
    const auto f = random_tensor(static_cast<std::size_t>(state.range(0)), 197, 384);
    const MaskGrid masks(f.n, TokenMask::excluding_leading(f.t, 1));
    for (auto _ : state) benchmark::DoNotOptimize(reference::mean_pool(f, masks));
}

void BM_PatchNormsParallel(benchmark::State& state) {
    const auto f = random_tensor(static_cast<std::size_t>(state.range(0)), 197, 384);
    const TokenMask mask = TokenMask::excluding_leading(f.t, 1);
    for (auto _ : state) benchmark::DoNotOptimize(patch_norms(f, mask));
}

void BM_PatchNormsSerial(benchmark::State& state) {
    const auto f = random_tensor(static_cast<std::size_t>(state.range(0)), 197, 384);
    for (auto _ : state) benchmark::DoNotOptimize(reference::patch_norms(f));
}

double mean_stat(const std::vector<double>& x, std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += x[i];
    return s / static_cast<double>(idx.size());
}

void BM_BootstrapParallel(benchmark::State& state) {
    std::vector<double> x(400);
    CounterRng rng(3);
    for (auto& v : x) v = rng.normal();
    const Statistic stat = [&](std::span<const std::size_t> idx) { return mean_stat(x, idx); };
    for (auto _ : state) benchmark::DoNotOptimize(bootstrap_replicates(x.size(), stat, state.range(0), 11));
}

void BM_BootstrapSerial(benchmark::State& state) {
    std::vector<double> x(400);
    CounterRng rng(3);
    for (auto& v : x) v = rng.normal();
    const Statistic stat = [&](std::span<const std::size_t> idx) { return mean_stat(x, idx); };
    for (auto _ : state) benchmark::DoNotOptimize(reference::bootstrap_replicates(x.size(), stat, state.range(0), 11));
}

}  // namespace

BENCHMARK(BM_MeanPoolParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_MeanPoolSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_PatchNormsParallel)->Arg(64)->Arg(256);
BENCHMARK(BM_PatchNormsSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_BootstrapParallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_BootstrapSerial)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
