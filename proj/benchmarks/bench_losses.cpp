#include <benchmark/benchmark.h>

#include "faircal/autodiff.hpp"
#include "faircal/losses.hpp"
#include "faircal/rng.hpp"

using namespace faircal;

namespace {

struct Batch {
  Tensor2 z;
  std::vector<int> y;
  std::vector<int> a;
};

Batch make_batch(std::size_t n) {
  Rng rng(2);
  Batch b{Tensor2(n, 2), std::vector<int>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < 2 * n; ++i) b.z[i] = rng.uniform(-3, 3);
  for (std::size_t i = 0; i < n; ++i) {
    b.y[i] = static_cast<int>(rng.below(2));
    b.a[i] = static_cast<int>(rng.below(2));
  }
  return b;
}

// Value and gradient of the group-wise kernel loss; sorted sweeps make this n log n.
void BM_GroupwisePairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto kind = state.range(1) == 0 ? LossKind::mmce : LossKind::mmce_w;
  const Batch b = make_batch(n);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Var z = tape.variable(b.z);
    const ad::Var loss = losses::groupwise_pairwise(tape, kind, z, b.y, b.a, 0.5);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.gradient(z));
  }
  state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_GroupwisePairwise)
    ->ArgsProduct({benchmark::CreateRange(256, 16384, 4), {0, 1}})
    ->Complexity(benchmark::oNLogN);

void BM_GroupwiseLinear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Batch b = make_batch(n);
  LossSpec spec;
  spec.kind = LossKind::focal_sd;
  const auto base = losses::linear_loss(spec);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Var z = tape.variable(b.z);
    tape.backward(losses::groupwise_linear(tape, base, z, b.y, b.a, 0.5));
    benchmark::DoNotOptimize(tape.gradient(z));
  }
}
BENCHMARK(BM_GroupwiseLinear)->Arg(1500);

}  // namespace

BENCHMARK_MAIN();
