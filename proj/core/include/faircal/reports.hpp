#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faircal/experiment.hpp"
#include "faircal/pareto.hpp"
#include "faircal/summary.hpp"

namespace faircal {

inline constexpr const char* kRunLogHeader =
    "epoch,loss,acc,ece,pe_stoch,pe_det,ece_ts,pe_stoch_ts,t0,t1";
inline constexpr const char* kParetoHeader = "pe,ece,acc,run_id,epoch";

void write_run_log_csv(const RunLog& log, const std::filesystem::path& path);
/// Rows of a run-log CSV; the in-memory validation columns are left at 0.
std::vector<EpochRow> read_run_log_csv(const std::filesystem::path& path);

void write_pareto_csv(std::span<const ParetoPoint> front, const std::filesystem::path& path);
std::vector<ParetoPoint> read_pareto_csv(const std::filesystem::path& path);

void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path);

struct ParetoSeries {
  std::string name;
  std::vector<ParetoPoint> front;
};

/// One front per technique plus its "_ts" hybrid, each over every grid cell,
/// seed and epoch, after the accuracy filter against the best accuracy of all
/// train-time techniques.
std::vector<ParetoSeries> pareto_fronts(std::span<const RunLog> logs, double accuracy_slack);

/// Scatter of the fronts, one polyline per series.
void write_pareto_svg(std::span<const ParetoSeries> series, const std::string& title,
                      const std::filesystem::path& path);

struct ReportOptions {
  std::string title = "fronts";
  double accuracy_slack = 0.05;
  bool svg = true;
};

/// Writes under out_dir:
///   runs/<run_id>.csv, runs.csv (manifest), failures.csv,
///   summary_<objective>.csv for each objective,
///   pareto/<technique>.csv and pareto/<technique>_ts.csv, pareto.svg.
/// Output depends only on the inputs, so re-emission is byte-identical.
void emit_reports(const SweepResult& result, const std::filesystem::path& out_dir,
                  const ReportOptions& options = {});

/// Reads the logs named by out_dir/runs.csv back.
std::vector<RunLog> load_run_logs(const std::filesystem::path& out_dir);

}  // namespace faircal
