#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faircal/dataset.hpp"
#include "faircal/losses.hpp"
#include "faircal/metrics.hpp"
#include "faircal/mlp.hpp"
#include "faircal/temperature.hpp"

namespace faircal {

struct TrainingConfig {
  LossSpec loss;
  int epochs = 500;
  double learning_rate = 1e-4;
  std::size_t ece_bins = kDefaultBins;
  /// 0 trains on the full training split each epoch.
  std::size_t batch_size = 0;
  bool temperature_scaling = true;
  TsConfig ts;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Identity of one grid cell. rho is set only for group-wise losses and
/// lambda only for the kinds that take one.
struct RunId {
  LossKind kind = LossKind::nll;
  bool groupwise = false;
  std::optional<double> rho;
  std::optional<double> lambda;
  std::uint64_t seed = 0;

  /// e.g. "mmce" or "mmce_g" for the group-wise variant.
  std::string technique() const;
  /// Filesystem-safe unique name, e.g. "mmce_g_rho0.6_lam2_s1".
  std::string str() const;

  static RunId from(const TrainingConfig& config);
  friend bool operator==(const RunId&, const RunId&) = default;
};

/// One epoch of a run. Metrics are on the test split; the *_ts columns are
/// after dual temperature scaling fitted on the validation split. Missing PE
/// values (skipped classes) are NaN.
struct EpochRow {
  int epoch = 0;
  double loss = 0.0;
  double acc = 0.0;
  double ece = 0.0;
  double pe_stoch = 0.0;
  double pe_det = 0.0;
  double ece_ts = 0.0;
  double pe_stoch_ts = 0.0;
  double t0 = 1.0;
  double t1 = 1.0;
  // Kept in memory only.
  double val_ece = 0.0;
  double val_ece_ts = 0.0;

  friend bool operator==(const EpochRow&, const EpochRow&) = default;
};

struct RunLog {
  RunId id;
  std::vector<EpochRow> rows;
};

/// Encoded splits plus the training base rates PE is measured against.
struct PreparedData {
  EncodedDataset train;
  EncodedDataset validation;
  EncodedDataset test;
  BaseRates train_rates;
};

/// Splits 6:1:1 with `split_seed`. Throws DataError when a group is missing
/// from the training split.
PreparedData prepare(const EncodedDataset& data, std::uint64_t split_seed);

/// Trains the perceptron for config.epochs epochs and logs one row per epoch.
/// Throws NumericError when the loss or parameters become non-finite.
/// The trained weights are stored in `final_params` when given.
RunLog run_experiment(const PreparedData& data, const TrainingConfig& config,
                      ModelParams* final_params = nullptr);

struct SweepConfig {
  std::vector<LossSpec> losses;
  std::vector<double> rho_grid;
  std::vector<double> lambda_grid;
  std::vector<std::uint64_t> seeds;
  /// Loss fields of `base` are overwritten per cell.
  TrainingConfig base;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned jobs = 1;

  void validate() const;
};

/// Grid cells in execution order: losses, then rho, then lambda, then seeds.
/// Axes a loss does not use collapse to a single cell.
std::vector<TrainingConfig> expand_grid(const SweepConfig& config);

struct FailureRecord {
  RunId id;
  std::string message;
};

struct SweepResult {
  std::vector<RunLog> logs;
  std::vector<FailureRecord> failures;
};

using SweepProgress = std::function<void(const RunId&, bool ok)>;

/// Runs every cell. A cell that throws is recorded as a failure
/// and the others continue; results are ordered as in expand_grid regardless
/// of the number of jobs.
SweepResult sweep(const PreparedData& data, const SweepConfig& config,
                  const SweepProgress& progress = {});

}  // namespace faircal
