#include <ckdpipe/evaluate.hpp>
#include <ckdpipe/feature_select.hpp>
#include <ckdpipe/models.hpp>
#include <ckdpipe/random.hpp>
#include <ckdpipe/resample.hpp>
#include <ckdpipe/transforms.hpp>

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

namespace {

using namespace ckdpipe;

// Two shifted Gaussian blobs, roughly the shape of the prepared training partition.
LabeledMatrix blobs(std::size_t n, std::size_t m, std::uint64_t seed = 7) {
    Rng rng(seed);
    LabeledMatrix d;
    d.x = Matrix(n, m);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.y[i] = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < m; ++j) {
            d.x(i, j) = rng.normal() + (d.y[i] ? 1.0 : 0.0);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        d.features.push_back("x" + std::to_string(j));
    }
    return d;
}

void BM_LofScores(benchmark::State& state) {
    const auto d = blobs(static_cast<std::size_t>(state.range(0)), 24);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lof_scores(d.x, 20));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LofScores)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_Pearson(benchmark::State& state) {
    const auto d = blobs(300, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pearson_matrix(d.x));
    }
}
BENCHMARK(BM_Pearson)->Arg(24)->Arg(48);

void BM_Train(benchmark::State& state) {
    const auto algorithm = all_algorithms[static_cast<std::size_t>(state.range(0))];
    const auto d = blobs(288, 12);
    const ModelSpec spec{algorithm, Hyperparameters::reduced(), 3};
    state.SetLabel(std::string(to_string(algorithm)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(spec, d));
    }
}
BENCHMARK(BM_Train)->DenseRange(0, static_cast<int>(all_algorithms.size()) - 1)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        s[i] = rng.uniform();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(y, s));
    }
}
BENCHMARK(BM_Auc)->Arg(100)->Arg(10000);

} // namespace

BENCHMARK_MAIN();
