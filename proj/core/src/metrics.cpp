#include "faircal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faircal/errors.hpp"

namespace faircal {

namespace {

void check_lengths(const Tensor2& probs, const std::vector<int>& labels,
                   const std::vector<int>& groups) {
  if (probs.rows() != labels.size() || labels.size() != groups.size()) {
    throw ShapeError("PredictionSet: probabilities, labels and groups differ in length");
  }
  for (int a : groups) {
    if (a != 0 && a != 1) throw DataError("PredictionSet: group flags must be 0 or 1");
  }
}

}  // namespace

PredictionSet PredictionSet::from_probabilities(Tensor2 probs, std::vector<int> labels,
                                                std::vector<int> groups) {
  check_lengths(probs, labels, groups);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double total = 0.0;
    for (double p : probs.row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) throw DataError("PredictionSet: probability outside [0, 1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DataError("PredictionSet: row does not sum to 1");
  }
  PredictionSet out;
  out.predicted.resize(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    out.predicted[i] = static_cast<int>(argmax(probs.row(i)));
  }
  out.probs = std::move(probs);
  out.labels = std::move(labels);
  out.groups = std::move(groups);
  return out;
}

PredictionSet PredictionSet::from_logits(const Tensor2& logits, std::vector<int> labels,
                                         std::vector<int> groups) {
  check_lengths(logits, labels, groups);
  PredictionSet out;
  out.probs = softmax_rows(logits);
  out.predicted.resize(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out.predicted[i] = static_cast<int>(argmax(logits.row(i)));
  }
  out.labels = std::move(labels);
  out.groups = std::move(groups);
  return out;
}

PredictionSet PredictionSet::subset(int group) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (groups[i] == group) rows.push_back(i);
  }
  PredictionSet out;
  out.probs = Tensor2(rows.size(), num_classes());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    std::copy(probs.row(rows[j]).begin(), probs.row(rows[j]).end(), out.probs.row(j).begin());
    out.predicted.push_back(predicted[rows[j]]);
    out.labels.push_back(labels[rows[j]]);
    out.groups.push_back(group);
  }
  return out;
}

std::size_t bin_index(double confidence, std::size_t bins) {
  if (bins == 0) throw ConfigError("bin_index: need at least one bin");
  if (!(confidence > 0.0)) return 0;
  const auto m = static_cast<double>(bins);
  auto upper = static_cast<std::size_t>(std::ceil(confidence * m));
  upper = std::clamp<std::size_t>(upper, 1, bins);
  // Repair rounding in confidence * M against the exact interval edges.
  while (upper > 1 && confidence <= static_cast<double>(upper - 1) / m) --upper;
  while (upper < bins && confidence > static_cast<double>(upper) / m) ++upper;
  return upper - 1;
}

CalibrationBins bin_predictions(const PredictionSet& preds, std::size_t bins) {
  if (bins == 0) throw ConfigError("bin_predictions: need at least one bin");
  if (preds.size() == 0) throw DataError("bin_predictions: empty prediction set");
  CalibrationBins out;
  out.total = preds.size();
  out.counts.assign(bins, 0);
  out.accuracy.assign(bins, 0.0);
  out.confidence.assign(bins, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double conf = preds.confidence(i);
    const std::size_t b = bin_index(conf, bins);
    ++out.counts[b];
    out.accuracy[b] += preds.correct(i) ? 1.0 : 0.0;
    out.confidence[b] += conf;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out.counts[b] == 0) continue;
    out.accuracy[b] /= static_cast<double>(out.counts[b]);
    out.confidence[b] /= static_cast<double>(out.counts[b]);
  }
  return out;
}

double ece(const CalibrationBins& bins) {
  if (bins.total == 0) throw DataError("ece: no samples");
  double total = 0.0;
  for (std::size_t b = 0; b < bins.bin_count(); ++b) {
    if (bins.counts[b] == 0) continue;
    total += static_cast<double>(bins.counts[b]) / static_cast<double>(bins.total) *
             std::abs(bins.accuracy[b] - bins.confidence[b]);
  }
  return total;
}

double ece(const PredictionSet& preds, std::size_t bins) {
  return ece(bin_predictions(preds, bins));
}

double accuracy(const PredictionSet& preds) {
  if (preds.size() == 0) throw DataError("accuracy: empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds.correct(i) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double BaseRates::rate(std::size_t k, int group) const {
  const auto& rates = class_given_group[static_cast<std::size_t>(group)];
  if (!rates) throw DataError("BaseRates: group " + std::to_string(group) + " has no samples");
  return (*rates)[k];
}

BaseRates base_rates(std::span<const int> labels, std::span<const int> groups,
                     std::size_t num_classes) {
  if (labels.size() != groups.size()) throw ShapeError("base_rates: length mismatch");
  if (num_classes < 2) throw ConfigError("base_rates: need at least 2 classes");
  BaseRates out;
  out.num_classes = num_classes;
  std::array<std::vector<double>, 2> counts = {std::vector<double>(num_classes, 0.0),
                                               std::vector<double>(num_classes, 0.0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (groups[i] != 0 && groups[i] != 1) throw DataError("base_rates: group flags must be 0/1");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("base_rates: label out of range");
    }
    const auto a = static_cast<std::size_t>(groups[i]);
    ++out.group_counts[a];
    counts[a][static_cast<std::size_t>(labels[i])] += 1.0;
  }
  const std::size_t n = labels.size();
  out.group1_fraction =
      n == 0 ? 0.0 : static_cast<double>(out.group_counts[1]) / static_cast<double>(n);
  for (std::size_t a = 0; a < 2; ++a) {
    if (out.group_counts[a] == 0) continue;
    for (double& c : counts[a]) c /= static_cast<double>(out.group_counts[a]);
    out.class_given_group[a] = std::move(counts[a]);
  }
  return out;
}

PeResult pe(const PredictionSet& preds, const BaseRates& train_rates, PeMode mode) {
  if (!train_rates.complete()) {
    throw DataError("pe: training base rates are undefined for one group");
  }
  const std::size_t k = preds.num_classes();
  if (k != train_rates.num_classes) throw ShapeError("pe: class count mismatch");
  std::array<std::vector<double>, 2> predicted(
      {std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)});
  std::array<std::size_t, 2> counts{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto a = static_cast<std::size_t>(preds.groups[i]);
    ++counts[a];
    if (mode == PeMode::stochastic) {
      for (std::size_t c = 0; c < k; ++c) predicted[a][c] += preds.probs(i, c);
    } else {
      predicted[a][static_cast<std::size_t>(preds.predicted[i])] += 1.0;
    }
  }
  PeResult out;
  if (counts[0] == 0 || counts[1] == 0) {
    for (std::size_t c = 0; c < k; ++c) out.skipped.push_back(c);
    return out;
  }
  double worst = 0.0;
  bool any = false;
  for (std::size_t c = 0; c < k; ++c) {
    const double base1 = train_rates.rate(c, 1);
    const double base0 = train_rates.rate(c, 0);
    if (base1 < kPeDenominatorGuard || base0 < kPeDenominatorGuard) {
      out.skipped.push_back(c);
      continue;
    }
    const double model1 = predicted[1][c] / static_cast<double>(counts[1]);
    const double model0 = predicted[0][c] / static_cast<double>(counts[0]);
    worst = std::max(worst, std::abs(model1 / base1 - model0 / base0));
    any = true;
  }
  if (any) out.value = worst;
  return out;
}

std::array<std::optional<double>, 2> groupwise_ece(const PredictionSet& preds, std::size_t bins) {
  std::array<std::optional<double>, 2> out;
  for (int a = 0; a < 2; ++a) {
    PredictionSet part = preds.subset(a);
    if (part.size() > 0) out[static_cast<std::size_t>(a)] = ece(part, bins);
  }
  return out;
}

MetricsReport evaluate(const PredictionSet& preds, const BaseRates& train_rates,
                       std::size_t bins) {
  MetricsReport report;
  report.n_eval = preds.size();
  report.accuracy = accuracy(preds);
  report.ece = ece(preds, bins);
  report.pe_stochastic = pe(preds, train_rates, PeMode::stochastic).value;
  report.pe_deterministic = pe(preds, train_rates, PeMode::deterministic).value;
  report.groupwise_ece = groupwise_ece(preds, bins);
  return report;
}

}  // namespace faircal
