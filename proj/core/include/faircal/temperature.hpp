#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "faircal/metrics.hpp"
#include "faircal/tensor.hpp"

namespace faircal {

/// One softmax temperature per sensitive group.
struct TemperaturePair {
  double t0 = 1.0;
  double t1 = 1.0;

  double for_group(int group) const { return group == 1 ? t1 : t0; }
  void validate() const;
};

struct TsConfig {
  double learning_rate = 1e-2;
  int max_epochs = 500;
  /// Consecutive validation-ECE increases tolerated before stopping.
  int patience = 1;
  std::size_t ece_bins = kDefaultBins;
};

enum class TsStopReason { ece_increase, max_epochs };

std::string_view to_string(TsStopReason reason);

/// Entry e is the state after e Adam steps; entry 0 is T = 1.
struct TsFitTrace {
  std::vector<double> val_loss;
  std::vector<double> val_ece;
  std::vector<TemperaturePair> temperatures;
  std::size_t chosen_epoch = 0;
  TsStopReason stop_reason = TsStopReason::max_epochs;
};

struct DualTsFit {
  TemperaturePair temperatures;
  TsFitTrace trace;
  /// Groups absent from the validation data keep T = 1.
  std::array<bool, 2> group_missing{};
};

/// z / T; throws ConfigError for T <= 0.
Tensor2 scale_logits(const Tensor2& logits, double temperature);

/// Fits T0, T1 = exp(u0), exp(u1) from 1 by Adam on the validation cross-entropy
/// (each row divided by its group's temperature), early-stopping on validation
/// ECE and returning the lowest-ECE snapshot.
DualTsFit fit_dual_temperature(const Tensor2& val_logits, std::span<const int> val_labels,
                               std::span<const int> val_groups, const TsConfig& config = {});

/// Classical single-temperature scaling with the same schedule.
struct SingleTsFit {
  double temperature = 1.0;
  TsFitTrace trace;
};
SingleTsFit fit_temperature(const Tensor2& val_logits, std::span<const int> val_labels,
                            const TsConfig& config = {});

/// Per-row scaling by the row's group temperature. Predicted classes are taken
/// from the unscaled logits, so accuracy is unchanged by construction.
PredictionSet apply_dual_temperature(const Tensor2& logits, std::span<const int> labels,
                                     std::span<const int> groups, const TemperaturePair& pair);

}  // namespace faircal
