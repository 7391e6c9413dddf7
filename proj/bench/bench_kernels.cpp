// Serial reference vs OpenMP episode kernels on one assembled model.

#include <benchmark/benchmark.h>

#include "dynshot/kernels.hpp"
#include "dynshot/rng.hpp"

using namespace dynshot;

namespace {

struct Fixture {
  ModelCache cache;
  std::vector<Episode> episodes;

  Fixture(std::size_t n, std::size_t count) : cache(ModelSpec{}) {
    Rng rng(derive_seed(n, count));
    const std::size_t dim = cache.spec().feature_dim;
    for (std::size_t k = 0; k < count; ++k) {
      Tensor support({n, dim});
      for (double& v : support.values()) v = rng.normal();
      Tensor query({dim});
      for (double& v : query.values()) v = rng.normal();
      episodes.push_back(Episode{ClassSet(std::move(support)), std::move(query), static_cast<std::uint8_t>(k % 2)});
    }
    cache.get_or_assemble(n);
  }
};

void gradient(benchmark::State& state, Execution exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Fixture fx(n, static_cast<std::size_t>(state.range(1)));
  const AssembledModel& model = fx.cache.get_or_assemble(n);
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(model, fx.episodes, fx.cache.registry(), exec));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = exec == Execution::parallel ? parallel_threads() : 1;
}

void accuracy(benchmark::State& state, Execution exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Fixture fx(n, static_cast<std::size_t>(state.range(1)));
  const AssembledModel& model = fx.cache.get_or_assemble(n);
  for (auto _ : state) benchmark::DoNotOptimize(count_correct(model, fx.episodes, exec));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_GradientSerial(benchmark::State& s) { gradient(s, Execution::serial); }
void BM_GradientParallel(benchmark::State& s) { gradient(s, Execution::parallel); }
void BM_EvaluateSerial(benchmark::State& s) { accuracy(s, Execution::serial); }
void BM_EvaluateParallel(benchmark::State& s) { accuracy(s, Execution::parallel); }

}  // namespace

BENCHMARK(BM_GradientSerial)->Args({2, 32})->Args({5, 32})->Args({5, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Args({2, 32})->Args({5, 32})->Args({5, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Args({5, 1000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Args({5, 1000})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
