#include "structoscope/convergence.hpp"
#include "structoscope/kmeans.hpp"
#include "structoscope/segmentation.hpp"
#include "structoscope/sequence.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace structoscope;

namespace {

Labels random_labels(std::mt19937_64& rng, std::size_t length, int alphabet)
{
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    Labels out(length);
    for (auto& x : out) {
        x = sym(rng);
    }
    return out;
}

void bm_edit_distance(benchmark::State& state)
{
    std::mt19937_64 rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const Labels a = random_labels(rng, n, 5);
    const Labels b = random_labels(rng, n, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(edit_distance(a, b));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_edit_distance)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void bm_pairwise_edit_distances(benchmark::State& state)
{
    std::mt19937_64 rng(2);
    std::vector<Labels> seqs;
    for (int i = 0; i < state.range(0); ++i) {
        seqs.push_back(random_labels(rng, 40, 5));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(pairwise_edit_distances(seqs));
    }
}
BENCHMARK(bm_pairwise_edit_distances)->Arg(50)->Arg(200);

void bm_kmeans(benchmark::State& state)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cols = 60;
    std::vector<double> data(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            data[r * cols + c] = noise(rng) + static_cast<double>(r % 5) * (c == r % cols ? 4.0 : 0.0);
        }
    }
    KMeansOptions opt;
    opt.k = 5;
    opt.n_init = 1;
    opt.seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_fit(data, rows, cols, opt));
    }
}
BENCHMARK(bm_kmeans)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void bm_wasserstein(benchmark::State& state)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::vector<double> a(static_cast<std::size_t>(state.range(0)));
    std::vector<double> b(static_cast<std::size_t>(state.range(0)) + 1);
    for (auto& x : a) {
        x = pos(rng);
    }
    for (auto& x : b) {
        x = pos(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(wasserstein_1d(a, b));
    }
}
BENCHMARK(bm_wasserstein)->Arg(100)->Arg(10000);

void bm_bayesian_blocks(benchmark::State& state)
{
    std::mt19937_64 rng(5);
    std::exponential_distribution<double> gap(1.0);
    std::vector<double> t;
    double x = 0.0;
    for (int i = 0; i < state.range(0); ++i) {
        x += gap(rng);
        t.push_back(x);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(bayesian_blocks(t));
    }
}
BENCHMARK(bm_bayesian_blocks)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
