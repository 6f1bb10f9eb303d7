#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "faircal/experiment.hpp"

namespace faircal {

struct ParetoPoint {
  double pe = 0.0;
  double ece = 0.0;
  double acc = 0.0;
  std::string run_id;
  int epoch = 0;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

/// Non-dominated points, sorted by increasing pe. A point is dropped when
/// another point is no worse in both coordinates and better in one; of
/// several points with identical coordinates the earliest in `points` is
/// kept. Throws DataError on negative or non-finite coordinates.
std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points);

/// Same, after discarding points with acc < best_accuracy - accuracy_slack.
std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points, double accuracy_slack,
                                      double best_accuracy);

/// Every (run, epoch) of `logs` as a point; `hybrid` reads pe_stoch_ts and
/// ece_ts. Rows without a PE value are skipped.
std::vector<ParetoPoint> collect_points(std::span<const RunLog> logs, bool hybrid);

/// Highest test accuracy over all rows of all logs.
double best_accuracy(std::span<const RunLog> logs);

}  // namespace faircal
