#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faircal/experiment.hpp"

namespace faircal {

enum class Objective { fairness, fairness_deterministic, calibration };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view name);

/// Metrics at one selected (run, epoch).
struct Selection {
  std::uint64_t seed = 0;
  std::string run_id;
  int epoch = 0;
  double acc = 0.0;
  double ece = 0.0;
  double pe_stoch = 0.0;
  double pe_det = 0.0;
};

/// One technique under one objective. `hybrid` rows read the post-scaling
/// columns (ece_ts, pe_stoch_ts) and carry the "_ts" suffix.
struct SummaryRow {
  std::string technique;
  bool hybrid = false;
  std::size_t seeds = 0;
  double objective = 0.0;  // mean over seeds of the per-seed best value
  double acc = 0.0;
  double ece = 0.0;
  double pe_stoch = 0.0;
  double pe_det = 0.0;
  // Mean over seeds of the per-seed percentage change against the NLL
  // baseline at its own best epoch for the same seed. Empty without a baseline.
  std::optional<double> pct_fair;
  std::optional<double> pct_calib;
  std::optional<double> pct_acc;
  std::vector<Selection> per_seed;
};

struct SummaryOptions {
  Objective objective = Objective::fairness;
  bool include_hybrid = true;
  /// When set, only epochs within this many accuracy points of the best
  /// accuracy seen for that technique and seed are eligible.
  std::optional<double> accuracy_slack;
};

/// For every technique and seed, the epoch (over all grid cells and epochs)
/// with the lowest objective value, ties to the earliest run then epoch;
/// values are then averaged over seeds. NaN objective values are ignored.
/// Throws DataError when `logs` is empty.
std::vector<SummaryRow> best_metric_summary(std::span<const RunLog> logs,
                                            const SummaryOptions& options = {});

/// Relative change of `value` against `baseline` in percent.
double percent_change(double value, double baseline);

}  // namespace faircal
