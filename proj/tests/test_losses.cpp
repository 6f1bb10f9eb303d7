#include "doctest.h"

#include <cmath>

#include "faircal/autodiff.hpp"
#include "faircal/errors.hpp"
#include "faircal/losses.hpp"
#include "faircal/rng.hpp"
#include "oracles.hpp"

using namespace faircal;

namespace {

// Logits whose softmax is exactly p (binary or general K).
Tensor2 logits_for(std::initializer_list<std::initializer_list<double>> probs) {
  Tensor2 z = Tensor2::from_rows(probs);
  for (auto& v : z.values()) v = std::log(v);
  return z;
}

template <typename F>
double value(const Tensor2& z, const std::vector<int>& y, F f) {
  ad::Tape tape;
  return f(tape, tape.constant(z), y).value()[0];
}

double loss_of(LossKind kind, const Tensor2& z, const std::vector<int>& y) {
  ad::Tape tape;
  const ad::Var v = tape.constant(z);
  switch (kind) {
    case LossKind::nll: return losses::nll(tape, v, y).value()[0];
    case LossKind::label_smoothing: return losses::label_smoothing(tape, v, y).value()[0];
    case LossKind::focal: return losses::focal(tape, v, y).value()[0];
    case LossKind::focal_sd: return losses::focal_sd(tape, v, y).value()[0];
    case LossKind::dca: return losses::dca(tape, v, y).value()[0];
    case LossKind::mdca: return losses::mdca(tape, v, y).value()[0];
    case LossKind::mmce: return losses::mmce(tape, v, y).value()[0];
    case LossKind::mmce_w: return losses::mmce_w(tape, v, y).value()[0];
  }
  return 0.0;
}

}  // namespace

TEST_CASE("nll hand values") {
  CHECK(value(logits_for({{0.5, 0.5}}), {0}, losses::nll) == doctest::Approx(std::log(2.0)));
  CHECK(value(logits_for({{0.5, 0.5}, {0.75, 0.25}}), {1, 1}, losses::nll) ==
        doctest::Approx((std::log(2.0) + std::log(4.0)) / 2).epsilon(1e-12));
  CHECK(value(Tensor2::from_rows({{800.0, 0.0}}), {0}, losses::nll) == doctest::Approx(0.0));
}

TEST_CASE("label smoothing hand values") {
  const Tensor2 z = logits_for({{0.9, 0.1}});
  auto ls = [](double alpha) {
    return [alpha](ad::Tape& t, ad::Var v, std::span<const int> y) {
      return losses::label_smoothing(t, v, y, alpha);
    };
  };
  CHECK(value(z, {0}, ls(0.05)) ==
        doctest::Approx(-(0.95 * std::log(0.9) + 0.05 * std::log(0.1))).epsilon(1e-12));
  CHECK(value(z, {0}, ls(0.0)) == doctest::Approx(value(z, {0}, losses::nll)).epsilon(1e-14));
  // K = 3, one-hot target: s = (0.95, 0.025, 0.025).
  const Tensor2 z3 = logits_for({{0.5, 0.3, 0.2}});
  CHECK(value(z3, {0}, ls(0.05)) ==
        doctest::Approx(-(0.95 * std::log(0.5) + 0.025 * std::log(0.3) + 0.025 * std::log(0.2)))
            .epsilon(1e-12));
}

TEST_CASE("focal and focal_sd hand values") {
  auto fl = [](double g) {
    return [g](ad::Tape& t, ad::Var v, std::span<const int> y) { return losses::focal(t, v, y, g); };
  };
  CHECK(value(logits_for({{0.5, 0.5}}), {0}, fl(3.0)) ==
        doctest::Approx(0.125 * std::log(2.0)).epsilon(1e-12));
  Rng rng(1);
  const Tensor2 z = oracle::random_logits(rng, 6, 3);
  const std::vector<int> y = oracle::random_ints(rng, 6, 3);
  CHECK(value(z, y, fl(0.0)) == doctest::Approx(value(z, y, losses::nll)).epsilon(1e-14));

  CHECK(value(logits_for({{0.1, 0.9}}), {0}, losses::focal_sd) ==
        doctest::Approx(-std::pow(0.9, 5) * std::log(0.1)).epsilon(1e-12));
  CHECK(value(logits_for({{0.5, 0.5}}), {0}, losses::focal_sd) ==
        doctest::Approx(value(logits_for({{0.5, 0.5}}), {0}, fl(3.0))));
  // p_y = 0.2 sits in the gamma = 5 branch.
  const Tensor2 edge = Tensor2::from_rows({{0.0, std::log(4.0)}});
  CHECK(value(edge, {0}, losses::focal_sd) ==
        doctest::Approx(-std::pow(0.8, 5) * std::log(0.2)).epsilon(1e-9));
}

TEST_CASE("dca and mdca hand values") {
  CHECK(value(logits_for({{0.8, 0.2}}), {0}, losses::dca) == doctest::Approx(0.2));
  CHECK(value(logits_for({{0.9, 0.1}, {0.9, 0.1}}), {0, 1}, losses::dca) == doctest::Approx(0.4));
  CHECK(value(logits_for({{0.7, 0.3}, {0.6, 0.4}}), {0, 1}, losses::mdca) ==
        doctest::Approx(0.15));
  CHECK(value(logits_for({{0.5, 0.5}, {0.5, 0.5}}), {0, 1}, losses::mdca) ==
        doctest::Approx(0.0));
}

TEST_CASE("laplacian kernel") {
  CHECK(losses::laplacian_kernel(0.3, 0.3) == 1.0);
  CHECK(losses::laplacian_kernel(0.2, 0.6, 0.2) == doctest::Approx(std::exp(-1.0)));
  CHECK(losses::laplacian_kernel(0.1, 0.7) == losses::laplacian_kernel(0.7, 0.1));
}

TEST_CASE("mmce and mmce_w hand values") {
  CHECK(value(logits_for({{0.8, 0.2}}), {0}, [](ad::Tape& t, ad::Var v, std::span<const int> y) {
          return losses::mmce(t, v, y);
        }) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(value(Tensor2::from_rows({{900.0, 0.0}}), {0},
              [](ad::Tape& t, ad::Var v, std::span<const int> y) { return losses::mmce(t, v, y); }) ==
        doctest::Approx(0.0));
  // One correct at r = 0.7, one wrong at r = 0.6 (m1 = m0 = 1):
  //   (0.3)^2 + (0.6)^2 - 2 * 0.3 * 0.6 * k(0.7, 0.6)
  const double k = std::exp(-0.1 / 0.4);
  const double expected = std::sqrt(0.09 + 0.36 - 2 * 0.18 * k);
  CHECK(value(logits_for({{0.7, 0.3}, {0.6, 0.4}}), {0, 1},
              [](ad::Tape& t, ad::Var v, std::span<const int> y) { return losses::mmce_w(t, v, y); }) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mmce family equals the brute-force double loop") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(40), K = 2 + rng.below(2);
    const Tensor2 z = oracle::random_logits(rng, n, K);
    const std::vector<int> y = oracle::random_ints(rng, n, K);
    const auto cc = oracle::conf_corr(z, y);
    CHECK(std::abs(loss_of(LossKind::mmce, z, y) - oracle::mmce(cc, 0.2)) < 1e-12);
    CHECK(std::abs(loss_of(LossKind::mmce_w, z, y) - oracle::mmce_w(cc, 0.2)) < 1e-12);
  }
}

TEST_CASE("every loss is non-negative") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor2 z = oracle::random_logits(rng, 10, 3, 4.0);
    const std::vector<int> y = oracle::random_ints(rng, 10, 3);
    for (LossKind kind : {LossKind::nll, LossKind::label_smoothing, LossKind::focal,
                          LossKind::focal_sd, LossKind::dca, LossKind::mdca, LossKind::mmce,
                          LossKind::mmce_w}) {
      CAPTURE(to_string(kind));
      CHECK(loss_of(kind, z, y) >= 0.0);
    }
  }
}

TEST_CASE("group-wise linear endpoints") {
  Rng rng(8);
  const Tensor2 z = oracle::random_logits(rng, 7, 2);
  const std::vector<int> y = oracle::random_ints(rng, 7, 2);
  const std::vector<int> a = {0, 1, 1, 0, 0, 1, 0};
  LossSpec spec;
  spec.kind = LossKind::focal;
  const auto base = losses::linear_loss(spec);
  std::vector<std::size_t> rows0 = {0, 3, 4, 6}, rows1 = {1, 2, 5};
  auto sub = [&](const std::vector<std::size_t>& rows) {
    Tensor2 s(rows.size(), 2);
    std::vector<int> ys;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      s(j, 0) = z(rows[j], 0);
      s(j, 1) = z(rows[j], 1);
      ys.push_back(y[rows[j]]);
    }
    ad::Tape t;
    return base(t, t.constant(s), ys).value()[0];
  };
  auto grouped = [&](double rho) {
    ad::Tape t;
    return losses::groupwise_linear(t, base, t.constant(z), y, a, rho).value()[0];
  };
  CHECK(grouped(0.0) == doctest::Approx(sub(rows0)).epsilon(1e-14));
  CHECK(grouped(1.0) == doctest::Approx(sub(rows1)).epsilon(1e-14));
  CHECK(grouped(0.3) == doctest::Approx(0.7 * sub(rows0) + 0.3 * sub(rows1)).epsilon(1e-14));

  // An empty group contributes nothing and the other keeps its weight.
  const std::vector<int> all1(7, 1);
  ad::Tape t;
  CHECK(losses::groupwise_linear(t, base, t.constant(z), y, all1, 0.4).value()[0] ==
        doctest::Approx(0.4 * loss_of(LossKind::focal, z, y)).epsilon(1e-14));
}

TEST_CASE("group-wise pairwise matches the block triple-sum oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const Tensor2 z = oracle::random_logits(rng, n, 2);
    const std::vector<int> y = oracle::random_ints(rng, n, 2);
    const std::vector<int> a = oracle::random_ints(rng, n, 2);
    const double rho = rng.uniform();
    const auto cc = oracle::conf_corr(z, y);
    double m1 = 0;
    for (double c : cc.corr) m1 += c;
    const double m0 = static_cast<double>(n) - m1, m = static_cast<double>(n);

    for (LossKind kind : {LossKind::mmce, LossKind::mmce_w}) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (kind == LossKind::mmce) {
          v[i] = cc.corr[i] - cc.conf[i];
        } else {
          v[i] = cc.corr[i] == 1.0 ? (m / m1) * (1 - cc.conf[i]) : -(m / m0) * cc.conf[i];
        }
      }
      double block[2][2] = {{0, 0}, {0, 0}};
      double count[2] = {0, 0};
      for (std::size_t i = 0; i < n; ++i) count[a[i]] += 1;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          block[a[i]][a[j]] += v[i] * v[j] * oracle::kernel(cc.conf[i], cc.conf[j], 0.2);
      double form = 0.0;
      const double w[2] = {1 - rho, rho};
      for (int g = 0; g < 2; ++g)
        if (count[g] > 0) form += w[g] * w[g] * block[g][g] / (count[g] * count[g]);
      if (count[0] > 0 && count[1] > 0) form += 2 * rho * (1 - rho) * block[0][1] / (count[0] * count[1]);
      const double expected = std::sqrt(std::max(0.0, form));

      ad::Tape t;
      const double got = losses::groupwise_pairwise(t, kind, t.constant(z), y, a, rho).value()[0];
      CAPTURE(to_string(kind));
      CHECK(std::abs(got - expected) < 1e-12);
    }
  }
}

TEST_CASE("rho = |B1|/|B| collapses group-wise losses to their ungrouped form") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(20), K = 2 + rng.below(2);
    const Tensor2 z = oracle::random_logits(rng, n, K);
    const std::vector<int> y = oracle::random_ints(rng, n, K);
    const std::vector<int> a = oracle::random_ints(rng, n, 2);
    double n1 = 0;
    for (int g : a) n1 += g;
    const double rho = n1 / static_cast<double>(n);
    for (LossKind kind : {LossKind::nll, LossKind::label_smoothing, LossKind::focal,
                          LossKind::focal_sd}) {
      LossSpec spec;
      spec.kind = kind;
      ad::Tape t;
      const double grouped =
          losses::groupwise_linear(t, losses::linear_loss(spec), t.constant(z), y, a, rho).value()[0];
      CAPTURE(to_string(kind));
      CHECK(std::abs(grouped - loss_of(kind, z, y)) < 1e-12);
    }
    for (LossKind kind : {LossKind::mmce, LossKind::mmce_w}) {
      ad::Tape t;
      const double grouped = losses::groupwise_pairwise(t, kind, t.constant(z), y, a, rho).value()[0];
      CAPTURE(to_string(kind));
      CHECK(std::abs(grouped - loss_of(kind, z, y)) < 1e-12);
    }
  }
}

TEST_CASE("dca and mdca: grouped value bounds the ungrouped one at rho = |B1|/|B|") {
  // Both are absolute values of batch means, so the convex combination over
  // sub-batches can only be larger (triangle inequality).
  Rng rng(34);
  int strict = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(20);
    const Tensor2 z = oracle::random_logits(rng, n, 2);
    const std::vector<int> y = oracle::random_ints(rng, n, 2);
    std::vector<int> a = oracle::random_ints(rng, n, 2);
    a[0] = 0;
    a[1] = 1;
    double n1 = 0;
    for (int g : a) n1 += g;
    for (LossKind kind : {LossKind::dca, LossKind::mdca}) {
      LossSpec spec;
      spec.kind = kind;
      ad::Tape t;
      const double grouped = losses::groupwise_linear(t, losses::linear_loss(spec), t.constant(z),
                                                      y, a, n1 / static_cast<double>(n))
                                 .value()[0];
      const double plain = loss_of(kind, z, y);
      CHECK(grouped >= plain - 1e-12);
      if (grouped > plain + 1e-9) ++strict;
    }
  }
  CHECK(strict > 0);
}

TEST_CASE("total_loss composition") {
  Rng rng(2);
  const Tensor2 z = oracle::random_logits(rng, 4, 2);
  const std::vector<int> y = {0, 1, 1, 0};
  const std::vector<int> a = {0, 1, 0, 1};
  LossSpec nll;
  const double base = total_loss(nll, z, y, a);
  CHECK(base == doctest::Approx(loss_of(LossKind::nll, z, y)).epsilon(1e-14));

  LossSpec dca0;
  dca0.kind = LossKind::dca;
  dca0.lambda = 0.0;
  CHECK(total_loss(dca0, z, y, a) == base);

  LossSpec mm;
  mm.kind = LossKind::mmce;
  mm.lambda = 1.0;
  mm.groupwise = true;
  mm.rho = 0.5;
  ad::Tape t;
  const double pair = losses::groupwise_pairwise(t, LossKind::mmce, t.constant(z), y, a, 0.5).value()[0];
  CHECK(total_loss(mm, z, y, a) == doctest::Approx(base + pair).epsilon(1e-14));

  LossSpec ls;
  ls.kind = LossKind::label_smoothing;
  ls.groupwise = true;
  ls.rho = 0.5;
  ad::Tape t2;
  CHECK(total_loss(ls, z, y, a) ==
        doctest::Approx(losses::groupwise_linear(t2, losses::linear_loss(ls), t2.constant(z), y, a, 0.5)
                            .value()[0]));
}

TEST_CASE("loss spec validation") {
  LossSpec s;
  s.kind = LossKind::label_smoothing;
  s.lambda = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.kind = LossKind::mmce;
  s.lambda.reset();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.lambda = 1.0;
  s.rho = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.rho = 0.5;
  s.kernel_gamma = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.kernel_gamma = 0.2;
  s.validate();
  s.kind = LossKind::label_smoothing;
  s.lambda.reset();
  s.alpha = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  CHECK(parse_loss_kind("MMCE-W") == LossKind::mmce_w);
  CHECK(parse_loss_kind("label_smoothing") == LossKind::label_smoothing);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), ConfigError);
}

TEST_CASE("empty batches are rejected") {
  ad::Tape t;
  CHECK_THROWS_AS(losses::nll(t, t.constant(Tensor2(0, 2)), {}), DataError);
}
