#include "doctest.h"

#include <cmath>
#include <cstring>

#include "faircal/adam.hpp"
#include "faircal/autodiff.hpp"
#include "faircal/errors.hpp"
#include "faircal/losses.hpp"
#include "faircal/mlp.hpp"
#include "faircal/rng.hpp"
#include "oracles.hpp"

using namespace faircal;

namespace {

double max_rel_error(const Gradients& a, const Gradients& b) {
  double worst = 0.0;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t t = 0; t < ta.size(); ++t) {
    for (std::size_t i = 0; i < ta[t]->size(); ++i) {
      const double x = (*ta[t])[i], y = (*tb[t])[i];
      worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
    }
  }
  return worst;
}

Gradients autodiff_grad(const ModelParams& params, const Tensor2& x,
                        const std::function<ad::Var(ad::Tape&, ad::Var)>& head) {
  ad::Tape tape;
  const ParamVars vars = attach(tape, params);
  const ad::Var loss = head(tape, forward(tape, vars, tape.constant(x)));
  return grad(loss, tape, vars);
}

}  // namespace

TEST_CASE("init_mlp shapes, determinism and Glorot bounds") {
  const ModelParams p = init_mlp(97, 2, 0);
  CHECK(p.layers[0].weight.rows() == 97);
  CHECK(p.layers[0].weight.cols() == 128);
  CHECK(p.layers[1].weight.rows() == 128);
  CHECK(p.layers[1].weight.cols() == 64);
  CHECK(p.layers[2].weight.rows() == 64);
  CHECK(p.layers[2].weight.cols() == 2);
  CHECK(p.parameter_count() == 97 * 128 + 128 + 128 * 64 + 64 + 64 * 2 + 2);

  CHECK(init_mlp(4, 2, 7) == init_mlp(4, 2, 7));
  CHECK_FALSE(init_mlp(4, 2, 7) == init_mlp(4, 2, 8));

  for (const auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (double w : layer.weight.values()) CHECK(std::abs(w) <= limit);
    for (double b : layer.bias.values()) CHECK(b == 0.0);
  }
  CHECK_THROWS_AS(init_mlp(0, 2, 0), ConfigError);
  CHECK_THROWS_AS(init_mlp(3, 1, 0), ConfigError);
}

TEST_CASE("forward: zero weights, a hand-computed path, empty input") {
  ModelParams p = init_mlp(3, 2, 1).zeros_like();
  const Tensor2 x = Tensor2::from_rows({{1.0, 0.0, 0.0}});
  CHECK(forward(p, x) == Tensor2(1, 2, 0.0));

  // x0 -> h1[0] (weight 2, bias -0.5) -> h2[0] (weight 3) -> logit 1 (weight 0.5, bias 0.25)
  p.layers[0].weight(0, 0) = 2.0;
  p.layers[0].bias(0, 0) = -0.5;
  p.layers[0].bias(0, 1) = -1.0;  // relu cuts this unit
  p.layers[0].weight(0, 1) = 0.5;
  p.layers[1].weight(0, 0) = 3.0;
  p.layers[1].weight(1, 0) = 100.0;
  p.layers[2].weight(0, 1) = 0.5;
  p.layers[2].bias(0, 1) = 0.25;
  const Tensor2 z = forward(p, x);
  CHECK(z(0, 0) == doctest::Approx(0.0));
  CHECK(z(0, 1) == doctest::Approx((2.0 - 0.5) * 3.0 * 0.5 + 0.25));

  CHECK(forward(p, Tensor2(0, 3)).rows() == 0);
  CHECK(forward(p, Tensor2(0, 3)).cols() == 2);
  CHECK_THROWS_AS(forward(p, Tensor2(1, 4)), ShapeError);
}

TEST_CASE("taped forward equals plain forward") {
  Rng rng(2);
  const ModelParams p = init_mlp(5, 3, 4);
  const Tensor2 x = oracle::random_logits(rng, 6, 5);
  ad::Tape tape;
  const ParamVars vars = attach(tape, p);
  CHECK(forward(tape, vars, tape.constant(x)).value() == forward(p, x));
}

TEST_CASE("gradient of the sum of weights is all ones; constant loss gives zeros") {
  const ModelParams p = init_mlp(3, 2, 0);
  ad::Tape tape;
  const ParamVars vars = attach(tape, p);
  ad::Var total = ad::sum(vars.weights[0]);
  for (std::size_t l = 1; l < 3; ++l) total = total + ad::sum(vars.weights[l]);
  const Gradients g = grad(total, tape, vars);
  for (const auto& layer : g.layers) {
    for (double v : layer.weight.values()) CHECK(v == 1.0);
    for (double v : layer.bias.values()) CHECK(v == 0.0);
  }

  ad::Tape t2;
  const ParamVars v2 = attach(t2, p);
  const Gradients g2 = grad(t2.constant(Tensor2(1, 1, 3.0)), t2, v2);
  CHECK(g2 == p.zeros_like());
}

TEST_CASE("NLL gradient through the network matches finite differences") {
  Rng rng(9);
  const ModelParams p = init_mlp(4, 2, 3);
  const Tensor2 x = oracle::random_logits(rng, 4, 4);
  const std::vector<int> y = {0, 1, 1, 0};
  const Gradients g = autodiff_grad(p, x, [&](ad::Tape& t, ad::Var z) {
    return losses::nll(t, z, y);
  });
  const Gradients fd = finite_diff_grad(
      [&](const ModelParams& q) {
        ad::Tape t;
        return losses::nll(t, t.constant(forward(q, x)), y).value()[0];
      },
      p, 1e-5);
  CHECK(max_rel_error(g, fd) < 1e-6);
}

TEST_CASE("finite_diff_grad on a quadratic converges at second order") {
  const ModelParams p = init_mlp(2, 2, 5);
  auto cubic = [](const ModelParams& q) {
    double s = 0.0;
    for (const Tensor2* t : q.tensors())
      for (double v : t->values()) s += v * v * v / 3.0 + 0.5 * v * v;
    return s;
  };
  auto error = [&](double h) {
    const Gradients fd = finite_diff_grad(cubic, p, h);
    double worst = 0.0;
    const auto tf = fd.tensors();
    const auto tp = p.tensors();
    for (std::size_t t = 0; t < tf.size(); ++t)
      for (std::size_t i = 0; i < tf[t]->size(); ++i) {
        const double w = (*tp[t])[i];
        worst = std::max(worst, std::abs((*tf[t])[i] - (w * w + w)));
      }
    return worst;
  };
  const double e1 = error(1e-2), e2 = error(5e-3);
  CHECK(e1 < 1e-4);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));

  const Gradients q = finite_diff_grad(
      [](const ModelParams& m) {
        double s = 0.0;
        for (const Tensor2* t : m.tensors())
          for (double v : t->values()) s += 0.5 * v * v;
        return s;
      },
      p, 1e-4);
  CHECK(max_rel_error(q, p) < 1e-9);
  CHECK_THROWS_AS(finite_diff_grad(cubic, p, 0.0), ConfigError);
  CHECK_THROWS_AS(finite_diff_grad([](const ModelParams&) { return std::nan(""); }, p, 1e-3),
                  NumericError);
}

TEST_CASE("adam: zero gradient keeps parameters, first step moves by lr") {
  ModelParams p = init_mlp(3, 2, 0);
  const ModelParams before = p;
  AdamState state = AdamState::init(p);
  adam_step(p, p.zeros_like(), state);
  CHECK(p == before);
  CHECK(state.step == 1);

  ModelParams q = before;
  Gradients g = q.zeros_like();
  for (Tensor2* t : g.tensors())
    for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = (i % 2 == 0) ? 0.3 : -2.0;
  AdamState s2 = AdamState::init(q);
  adam_step(q, g, s2);
  const auto tq = q.tensors();
  const auto tb = before.tensors();
  for (std::size_t t = 0; t < tq.size(); ++t) {
    for (std::size_t i = 0; i < tq[t]->size(); ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      CHECK((*tq[t])[i] - (*tb[t])[i] == doctest::Approx(-1e-4 * sign).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam matches a scalar hand recurrence over several steps") {
  std::vector<double> w = {0.5}, m = {0.0}, v = {0.0};
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  double ref = 0.5, rm = 0.0, rv = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * ref;  // d/dw of w^2
    const std::vector<double> grads = {2.0 * w[0]};
    adam_update(w, grads, m, v, t, cfg);
    rm = 0.9 * rm + 0.1 * g;
    rv = 0.999 * rv + 0.001 * g * g;
    const double mh = rm / (1 - std::pow(0.9, t)), vh = rv / (1 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("adam rejects mismatched shapes and is deterministic") {
  ModelParams p = init_mlp(3, 2, 0);
  AdamState s = AdamState::init(p);
  CHECK_THROWS_AS(adam_step(p, init_mlp(4, 2, 0), s), ShapeError);

  ModelParams a = init_mlp(3, 2, 1), b = a;
  AdamState sa = AdamState::init(a), sb = AdamState::init(b);
  const Gradients g = init_mlp(3, 2, 9);
  adam_step(a, g, sa);
  adam_step(b, g, sb);
  CHECK(a == b);
}
