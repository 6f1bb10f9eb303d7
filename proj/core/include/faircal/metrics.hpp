#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "faircal/tensor.hpp"

namespace faircal {

inline constexpr std::size_t kDefaultBins = 10;

/// Probability rows with the labels and groups they were produced for.
/// `predicted` holds argmax per row; when built from logits it is taken from
/// the logits so that temperature scaling can never move it.
struct PredictionSet {
  Tensor2 probs;
  std::vector<int> predicted;
  std::vector<int> labels;
  std::vector<int> groups;

  static PredictionSet from_probabilities(Tensor2 probs, std::vector<int> labels,
                                          std::vector<int> groups);
  static PredictionSet from_logits(const Tensor2& logits, std::vector<int> labels,
                                   std::vector<int> groups);

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return probs.cols(); }
  double confidence(std::size_t i) const { return probs(i, static_cast<std::size_t>(predicted[i])); }
  bool correct(std::size_t i) const { return predicted[i] == labels[i]; }

  /// Rows of one group as a new set.
  PredictionSet subset(int group) const;
};

/// Equal-width bins I_m = ((m-1)/M, m/M]; confidence 0 goes to the first bin.
struct CalibrationBins {
  std::size_t total = 0;
  std::vector<std::size_t> counts;
  std::vector<double> accuracy;
  std::vector<double> confidence;

  std::size_t bin_count() const { return counts.size(); }
};

/// 0-based bin index of a confidence value.
std::size_t bin_index(double confidence, std::size_t bins);

CalibrationBins bin_predictions(const PredictionSet& preds, std::size_t bins = kDefaultBins);
double ece(const CalibrationBins& bins);
double ece(const PredictionSet& preds, std::size_t bins = kDefaultBins);
double accuracy(const PredictionSet& preds);

/// Empirical Pr[A=1] and Pr[Y=k | A=a]. A group with no rows has no rates.
struct BaseRates {
  std::size_t num_classes = 0;
  double group1_fraction = 0.0;
  std::array<std::size_t, 2> group_counts{};
  std::array<std::optional<std::vector<double>>, 2> class_given_group;

  bool complete() const { return class_given_group[0] && class_given_group[1]; }
  double rate(std::size_t k, int group) const;
};

BaseRates base_rates(std::span<const int> labels, std::span<const int> groups,
                     std::size_t num_classes);

enum class PeMode { stochastic, deterministic };

/// `value` is empty when every class had to be skipped; `skipped` lists the
/// classes whose base rate fell below the guard.
struct PeResult {
  std::optional<double> value;
  std::vector<std::size_t> skipped;
};

inline constexpr double kPeDenominatorGuard = 1e-12;

/// Proportional equality:
///   max_k | Pr^[Y^=k|A=1] / Pr[Y=k|A=1] - Pr^[Y^=k|A=0] / Pr[Y=k|A=0] |
/// with Pr[Y=k|A=a] from `train_rates` and Pr^ the group mean of p_k
/// (stochastic) or of 1{y^=k} (deterministic) over `preds`.
PeResult pe(const PredictionSet& preds, const BaseRates& train_rates, PeMode mode);

/// ECE computed separately on each group's rows; empty groups are nullopt.
std::array<std::optional<double>, 2> groupwise_ece(const PredictionSet& preds,
                                                   std::size_t bins = kDefaultBins);

struct MetricsReport {
  double accuracy = 0.0;
  double ece = 0.0;
  std::optional<double> pe_stochastic;
  std::optional<double> pe_deterministic;
  std::array<std::optional<double>, 2> groupwise_ece;
  std::size_t n_eval = 0;
};

MetricsReport evaluate(const PredictionSet& preds, const BaseRates& train_rates,
                       std::size_t bins = kDefaultBins);

}  // namespace faircal
