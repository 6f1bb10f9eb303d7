#include "faircal/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faircal/errors.hpp"

namespace faircal {

std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.pe) || !std::isfinite(p.ece) || p.pe < 0.0 || p.ece < 0.0) {
      throw DataError("pareto: coordinates must be finite and non-negative (run " + p.run_id +
                      ")");
    }
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].pe != points[b].pe) return points[a].pe < points[b].pe;
    if (points[a].ece != points[b].ece) return points[a].ece < points[b].ece;
    return a < b;
  });
  std::vector<ParetoPoint> front;
  double min_ece = std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    if (points[i].ece < min_ece) {
      front.push_back(points[i]);
      min_ece = points[i].ece;
    }
  }
  return front;
}

std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points, double accuracy_slack,
                                      double best_accuracy) {
  std::vector<ParetoPoint> kept;
  for (const auto& p : points) {
    if (p.acc >= best_accuracy - accuracy_slack) kept.push_back(p);
  }
  return pareto_front(kept);
}

std::vector<ParetoPoint> collect_points(std::span<const RunLog> logs, bool hybrid) {
  std::vector<ParetoPoint> points;
  for (const RunLog& log : logs) {
    const std::string id = log.id.str();
    for (const EpochRow& r : log.rows) {
      const double pe = hybrid ? r.pe_stoch_ts : r.pe_stoch;
      const double e = hybrid ? r.ece_ts : r.ece;
      if (std::isnan(pe)) continue;
      points.push_back({pe, e, r.acc, id, r.epoch});
    }
  }
  return points;
}

double best_accuracy(std::span<const RunLog> logs) {
  double best = -std::numeric_limits<double>::infinity();
  for (const RunLog& log : logs) {
    for (const EpochRow& r : log.rows) best = std::max(best, r.acc);
  }
  return best;
}

}  // namespace faircal
