#include <benchmark/benchmark.h>

#include "faircal/adam.hpp"
#include "faircal/autodiff.hpp"
#include "faircal/losses.hpp"
#include "faircal/mlp.hpp"
#include "faircal/rng.hpp"

using namespace faircal;

namespace {

struct Batch {
  Tensor2 x;
  std::vector<int> y;
  std::vector<int> a;
};

Batch make_batch(std::size_t n, std::size_t d) {
  Rng rng(1);
  Batch b{Tensor2(n, d), std::vector<int>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    b.x(i, rng.below(d)) = 1.0;
    b.y[i] = static_cast<int>(rng.below(2));
    b.a[i] = static_cast<int>(rng.below(2));
  }
  return b;
}

void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Batch b = make_batch(n, 100);
  const ModelParams p = init_mlp(100, 2, 0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, b.x));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(1500);

// One full optimizer step: tape forward, loss, reverse sweep, Adam update.
void BM_TrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Batch b = make_batch(n, 100);
  ModelParams p = init_mlp(100, 2, 0);
  AdamState adam = AdamState::init(p);
  LossSpec spec;
  spec.kind = static_cast<LossKind>(state.range(1));
  spec.groupwise = spec.kind != LossKind::nll;
  if (takes_lambda(spec.kind)) spec.lambda = 1.0;
  for (auto _ : state) {
    ad::Tape tape;
    const ParamVars vars = attach(tape, p);
    const ad::Var logits = forward(tape, vars, tape.constant(b.x));
    const ad::Var loss = total_loss(tape, spec, logits, b.y, b.a);
    adam_step(p, grad(loss, tape, vars), adam);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
  state.SetLabel(std::string(to_string(spec.kind)));
}
BENCHMARK(BM_TrainStep)
    ->Args({1500, static_cast<long>(LossKind::nll)})
    ->Args({1500, static_cast<long>(LossKind::mmce)})
    ->Args({1500, static_cast<long>(LossKind::mmce_w)})
    ->Args({1500, static_cast<long>(LossKind::mdca)})
    ->Args({128, static_cast<long>(LossKind::mmce)});

}  // namespace

BENCHMARK_MAIN();
