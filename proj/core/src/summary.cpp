#include "faircal/summary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "faircal/errors.hpp"

namespace faircal {
namespace {

struct Series {
  std::string technique;
  bool hybrid = false;
  // seed -> (run, row) pairs in log order
  std::map<std::uint64_t, std::vector<std::pair<const RunLog*, const EpochRow*>>> by_seed;
};

double ece_of(const EpochRow& r, bool hybrid) { return hybrid ? r.ece_ts : r.ece; }
double pe_of(const EpochRow& r, bool hybrid) { return hybrid ? r.pe_stoch_ts : r.pe_stoch; }

double objective_of(const EpochRow& r, bool hybrid, Objective objective) {
  switch (objective) {
    case Objective::fairness: return pe_of(r, hybrid);
    case Objective::fairness_deterministic: return r.pe_det;
    case Objective::calibration: return ece_of(r, hybrid);
  }
  return r.ece;
}

std::optional<Selection> select(const std::vector<std::pair<const RunLog*, const EpochRow*>>& rows,
                                bool hybrid, const SummaryOptions& options) {
  double acc_floor = -std::numeric_limits<double>::infinity();
  if (options.accuracy_slack) {
    double best_acc = -std::numeric_limits<double>::infinity();
    for (const auto& [log, row] : rows) best_acc = std::max(best_acc, row->acc);
    acc_floor = best_acc - *options.accuracy_slack;
  }
  const std::pair<const RunLog*, const EpochRow*>* best = nullptr;
  double best_value = 0.0;
  for (const auto& entry : rows) {
    const EpochRow& r = *entry.second;
    if (r.acc < acc_floor) continue;
    const double v = objective_of(r, hybrid, options.objective);
    if (std::isnan(v)) continue;
    if (best == nullptr || v < best_value) {
      best = &entry;
      best_value = v;
    }
  }
  if (best == nullptr) return std::nullopt;
  const EpochRow& r = *best->second;
  return Selection{best->first->id.seed, best->first->id.str(), r.epoch, r.acc, ece_of(r, hybrid), pe_of(r, hybrid),
                   r.pe_det};
}

double objective_of(const Selection& s, Objective objective) {
  switch (objective) {
    case Objective::fairness: return s.pe_stoch;
    case Objective::fairness_deterministic: return s.pe_det;
    case Objective::calibration: return s.ece;
  }
  return s.ece;
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::fairness: return "fairness";
    case Objective::fairness_deterministic: return "fairness_deterministic";
    case Objective::calibration: return "calibration";
  }
  return "?";
}

Objective parse_objective(std::string_view name) {
  if (name == "fairness") return Objective::fairness;
  if (name == "fairness_deterministic") return Objective::fairness_deterministic;
  if (name == "calibration") return Objective::calibration;
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

double percent_change(double value, double baseline) {
  return 100.0 * (value - baseline) / baseline;
}

std::vector<SummaryRow> best_metric_summary(std::span<const RunLog> logs,
                                            const SummaryOptions& options) {
  if (logs.empty()) throw DataError("summary: no run logs");

  std::vector<Series> series;
  auto series_for = [&](const std::string& technique, bool hybrid) -> Series& {
    for (auto& s : series) {
      if (s.technique == technique && s.hybrid == hybrid) return s;
    }
    series.push_back({technique, hybrid, {}});
    return series.back();
  };
  for (const RunLog& log : logs) {
    for (bool hybrid : {false, true}) {
      if (hybrid && !options.include_hybrid) continue;
      Series& s = series_for(log.id.technique(), hybrid);
      auto& rows = s.by_seed[log.id.seed];
      for (const EpochRow& r : log.rows) rows.emplace_back(&log, &r);
    }
  }
  // Non-hybrid series first, each group in order of first appearance.
  std::stable_partition(series.begin(), series.end(), [](const Series& s) { return !s.hybrid; });

  std::vector<SummaryRow> out;
  for (const Series& s : series) {
    SummaryRow row;
    row.technique = s.technique + (s.hybrid ? "_ts" : "");
    row.hybrid = s.hybrid;
    for (const auto& [seed, rows] : s.by_seed) {
      if (auto sel = select(rows, s.hybrid, options)) row.per_seed.push_back(*sel);
    }
    if (row.per_seed.empty()) continue;
    row.seeds = row.per_seed.size();
    const double n = static_cast<double>(row.seeds);
    for (const Selection& sel : row.per_seed) {
      row.objective += objective_of(sel, options.objective) / n;
      row.acc += sel.acc / n;
      row.ece += sel.ece / n;
      row.pe_stoch += sel.pe_stoch / n;
      row.pe_det += sel.pe_det / n;
    }
    out.push_back(std::move(row));
  }

  const Series* base_series = nullptr;
  for (const auto& s : series) {
    if (s.technique == "nll" && !s.hybrid) base_series = &s;
  }
  if (base_series != nullptr) {
    std::map<std::uint64_t, Selection> base_by_seed;
    for (const auto& [seed, rows] : base_series->by_seed) {
      if (auto sel = select(rows, false, options)) base_by_seed.emplace(seed, *sel);
    }
    const bool fair_det = options.objective == Objective::fairness_deterministic;
    for (auto& row : out) {
      double fair = 0.0, calib = 0.0, acc = 0.0;
      std::size_t used = 0;
      for (const Selection& sel : row.per_seed) {
        auto it = base_by_seed.find(sel.seed);
        if (it == base_by_seed.end()) continue;
        const Selection& b = it->second;
        fair += fair_det ? percent_change(sel.pe_det, b.pe_det)
                         : percent_change(sel.pe_stoch, b.pe_stoch);
        calib += percent_change(sel.ece, b.ece);
        acc += percent_change(sel.acc, b.acc);
        ++used;
      }
      if (used > 0) {
        row.pct_fair = fair / static_cast<double>(used);
        row.pct_calib = calib / static_cast<double>(used);
        row.pct_acc = acc / static_cast<double>(used);
      }
    }
  }
  return out;
}

}  // namespace faircal
