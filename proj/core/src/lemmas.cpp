#include "faircal/lemmas.hpp"

#include <cmath>

#include "faircal/errors.hpp"

namespace faircal {
namespace {

ZeroCheck check(double value, double sigma, double sigmas) {
  return {value, sigma, value <= sigmas * sigma};
}

double ece_sigma(const PredictionSet& preds, std::size_t bins) {
  std::vector<double> var(bins, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double c = preds.confidence(i);
    var[bin_index(c, bins)] += c * (1.0 - c);
  }
  double sigma = 0.0;
  for (double v : var) sigma += std::sqrt(v);
  return preds.size() == 0 ? 0.0 : sigma / static_cast<double>(preds.size());
}

double pe_sigma(const PredictionSet& preds, const BaseRates& rates) {
  const std::size_t K = preds.num_classes();
  double worst = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (rates.rate(k, 0) < kPeDenominatorGuard || rates.rate(k, 1) < kPeDenominatorGuard) continue;
    std::array<double, 2> var{};
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double q = preds.probs(i, k);
      var[static_cast<std::size_t>(preds.groups[i])] += q * (1.0 - q);
    }
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double denom =
          static_cast<double>(rates.group_counts[static_cast<std::size_t>(a)]) * rates.rate(k, a);
      const double s = std::sqrt(var[static_cast<std::size_t>(a)]) / denom;
      total += s * s;
    }
    worst = std::max(worst, std::sqrt(total));
  }
  return worst;
}

}  // namespace

bool LemmaReport::pass() const {
  return pooled_ece.pass && group_ece[0].pass && group_ece[1].pass && pe_stochastic.pass;
}

Tensor2 oracle_probabilities(const SyntheticSample& sample, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("oracle temperature must be positive");
  const SyntheticSpec& spec = sample.spec;
  const std::size_t n = sample.cells.size();
  Tensor2 probs(n, spec.num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = spec.conditional[sample.cells[i]][static_cast<std::size_t>(sample.data.groups[i])];
    double total = 0.0;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
      const double v = temperature == 1.0 ? p[k] : std::pow(p[k], 1.0 / temperature);
      probs(i, k) = v;
      total += v;
    }
    for (std::size_t k = 0; k < spec.num_classes; ++k) probs(i, k) /= total;
  }
  return probs;
}

LemmaReport verify_lemmas(const SyntheticSpec& spec, std::size_t n_samples,
                          const LemmaOptions& options) {
  if (n_samples < kMinLemmaSamples) {
    throw ConfigError("verify_lemmas: need at least " + std::to_string(kMinLemmaSamples) +
                      " samples");
  }
  SyntheticSpec sampled = spec;
  sampled.samples = n_samples;
  if (options.seed) sampled.seed = *options.seed;
  const SyntheticSample sample = generate_synthetic(sampled);

  const PredictionSet preds = PredictionSet::from_probabilities(
      oracle_probabilities(sample, options.temperature), sample.data.labels, sample.data.groups);
  const BaseRates rates = base_rates(sample.data.labels, sample.data.groups, spec.num_classes);
  if (!rates.complete()) throw DataError("verify_lemmas: sample contains a single group");

  LemmaReport report;
  report.samples = n_samples;
  report.temperature = options.temperature;
  report.sigmas = options.sigmas;
  report.accuracy = accuracy(preds);
  report.pooled_ece = check(ece(preds, options.bins), ece_sigma(preds, options.bins), options.sigmas);
  for (int a = 0; a < 2; ++a) {
    const PredictionSet g = preds.subset(a);
    report.group_ece[static_cast<std::size_t>(a)] =
        check(ece(g, options.bins), ece_sigma(g, options.bins), options.sigmas);
  }
  const PeResult stoch = pe(preds, rates, PeMode::stochastic);
  if (!stoch.value) throw DataError("verify_lemmas: every class skipped by the PE guard");
  report.pe_stochastic = check(*stoch.value, pe_sigma(preds, rates), options.sigmas);
  report.pe_deterministic = pe(preds, rates, PeMode::deterministic).value;
  return report;
}

}  // namespace faircal
