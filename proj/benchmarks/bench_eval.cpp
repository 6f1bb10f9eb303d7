#include <benchmark/benchmark.h>

#include "faircal/metrics.hpp"
#include "faircal/pareto.hpp"
#include "faircal/rng.hpp"
#include "faircal/temperature.hpp"

using namespace faircal;

namespace {

struct Eval {
  Tensor2 z;
  std::vector<int> y;
  std::vector<int> a;
};

Eval make_eval(std::size_t n, std::size_t k) {
  Rng rng(3);
  Eval e{Tensor2(n, k), std::vector<int>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n * k; ++i) e.z[i] = rng.uniform(-3, 3);
  for (std::size_t i = 0; i < n; ++i) {
    e.y[i] = static_cast<int>(rng.below(k));
    e.a[i] = static_cast<int>(rng.below(2));
  }
  return e;
}

void BM_EceAndPe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Eval e = make_eval(n, 2);
  const BaseRates rates = base_rates(e.y, e.a, 2);
  for (auto _ : state) {
    const PredictionSet p = PredictionSet::from_logits(e.z, e.y, e.a);
    benchmark::DoNotOptimize(evaluate(p, rates));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_EceAndPe)->Arg(250)->Arg(10000);

void BM_DualTemperatureFit(benchmark::State& state) {
  const Eval e = make_eval(static_cast<std::size_t>(state.range(0)), 2);
  TsConfig cfg;
  cfg.patience = 1 << 20;
  cfg.max_epochs = 100;
  for (auto _ : state) benchmark::DoNotOptimize(fit_dual_temperature(e.z, e.y, e.a, cfg));
}
BENCHMARK(BM_DualTemperatureFit)->Arg(250)->Arg(2000);

void BM_ParetoFront(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<ParetoPoint> pts(n);
  for (auto& p : pts) {
    p.pe = rng.uniform();
    p.ece = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(pareto_front(pts));
  state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_ParetoFront)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
