#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "faircal/config.hpp"
#include "faircal/errors.hpp"
#include "faircal/experiment.hpp"
#include "faircal/fixtures.hpp"
#include "faircal/reports.hpp"
#include "faircal/summary.hpp"
#include "faircal/synthetic.hpp"

using namespace faircal;
namespace fs = std::filesystem;

namespace {

PreparedData small_data(std::size_t n = 400, std::uint64_t seed = 3) {
  auto spec = binary_spec_with_rates(0.6, 0.3, 0.6, 6, n, seed);
  spec.group_feature = true;
  return prepare(generate_synthetic(spec).data, 1);
}

TrainingConfig quick(LossKind kind, int epochs = 8) {
  TrainingConfig c;
  c.loss.kind = kind;
  c.epochs = epochs;
  c.learning_rate = 1e-3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("faircal_harness_" + name);
  fs::remove_all(p);
  return p;
}

EpochRow row(int epoch, double acc, double ece, double pe, double pe_det = 0.5) {
  EpochRow r;
  r.epoch = epoch;
  r.acc = acc;
  r.ece = ece;
  r.pe_stoch = pe;
  r.pe_det = pe_det;
  r.ece_ts = ece / 2;
  r.pe_stoch_ts = pe / 2;
  return r;
}

RunLog log_for(LossKind kind, bool grouped, std::uint64_t seed, std::vector<EpochRow> rows) {
  RunLog log;
  log.id.kind = kind;
  log.id.groupwise = grouped;
  if (grouped) log.id.rho = 0.5;
  log.id.seed = seed;
  log.rows = std::move(rows);
  return log;
}

}  // namespace

TEST_CASE("run ids") {
  TrainingConfig c;
  c.loss.kind = LossKind::mmce;
  c.loss.groupwise = true;
  c.loss.rho = 0.6;
  c.loss.lambda = 2.0;
  c.seed = 1;
  const RunId id = RunId::from(c);
  CHECK(id.technique() == "mmce_g");
  CHECK(id.str() == "mmce_g_rho0.6_lam2_s1");
  c.loss.kind = LossKind::nll;
  c.loss.lambda.reset();
  c.loss.groupwise = false;
  CHECK(RunId::from(c).str() == "nll_s1");
  CHECK_FALSE(RunId::from(c).rho.has_value());
}

TEST_CASE("NLL separates a deterministic two-cell dataset") {
  SyntheticSpec spec;
  spec.cells = 2;
  spec.pr_group1 = 0.5;
  spec.conditional = {{std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0}},
                      {std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}}};
  spec.samples = 400;
  spec.seed = 5;
  const PreparedData data = prepare(generate_synthetic(spec).data, 2);
  TrainingConfig c = quick(LossKind::nll, 60);
  c.learning_rate = 1e-2;
  const RunLog log = run_experiment(data, c);
  REQUIRE(log.rows.size() == 60);
  CHECK(log.rows.back().acc > 0.95);
  CHECK(log.rows.back().loss < log.rows.front().loss);
}

TEST_CASE("DCA with lambda 0 trains exactly like NLL") {
  const PreparedData data = small_data();
  const TrainingConfig nll = quick(LossKind::nll);
  TrainingConfig dca = quick(LossKind::dca);
  dca.loss.lambda = 0.0;
  const RunLog a = run_experiment(data, nll), b = run_experiment(data, dca);
  CHECK(a.rows == b.rows);
}

TEST_CASE("post-scaling validation ECE never exceeds the unscaled value") {
  const PreparedData data = small_data(600);
  TrainingConfig c = quick(LossKind::nll, 15);
  c.learning_rate = 3e-3;
  const RunLog log = run_experiment(data, c);
  for (const EpochRow& r : log.rows) {
    CHECK(r.val_ece_ts <= r.val_ece + 1e-15);
    CHECK(r.t0 > 0.0);
    CHECK(r.t1 > 0.0);
  }
  c.temperature_scaling = false;
  for (const EpochRow& r : run_experiment(data, c).rows) {
    CHECK(r.t0 == 1.0);
    CHECK(r.ece_ts == r.ece);
    CHECK(r.pe_stoch_ts == r.pe_stoch);
  }
}

TEST_CASE("runs are deterministic and minibatching changes the trajectory") {
  const PreparedData data = small_data();
  TrainingConfig c = quick(LossKind::mmce);
  c.loss.groupwise = true;
  c.loss.lambda = 1.0;
  CHECK(run_experiment(data, c).rows == run_experiment(data, c).rows);
  TrainingConfig mb = c;
  mb.batch_size = 32;
  const RunLog a = run_experiment(data, mb);
  CHECK(a.rows == run_experiment(data, mb).rows);
  CHECK(a.rows != run_experiment(data, c).rows);
}

TEST_CASE("training data must contain both groups") {
  auto spec = binary_spec_with_rates(1.0, 0.3, 0.6, 3, 100, 1);
  CHECK_THROWS_AS(prepare(generate_synthetic(spec).data, 1), DataError);
}

TEST_CASE("sweep grid expansion") {
  SweepConfig s;
  LossSpec m;
  m.kind = LossKind::mmce;
  m.groupwise = true;
  s.losses = {m};
  s.rho_grid = {0.4, 0.6};
  s.lambda_grid = {1.0, 2.0};
  s.seeds = {0, 1};
  CHECK(expand_grid(s).size() == 8);

  LossSpec nll;
  s.losses = {nll, m};
  const auto cells = expand_grid(s);
  REQUIRE(cells.size() == 10);
  CHECK(cells[0].loss.kind == LossKind::nll);
  CHECK(cells[1].seed == 1);
  CHECK(cells[2].loss.rho == 0.4);
  CHECK(*cells[2].loss.lambda == 1.0);
  CHECK(*cells[4].loss.lambda == 2.0);
  CHECK(cells[6].loss.rho == 0.6);

  const auto adult = dataset_preset("adult").rho_grid;
  CHECK(adult.size() == 9);
  CHECK(adult.front() == doctest::Approx(0.4));
  CHECK(adult.back() == doctest::Approx(0.8));

  s.seeds.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("sweep runs every cell in order and records failures") {
  const PreparedData data = small_data(200);
  SweepConfig s;
  LossSpec m;
  m.kind = LossKind::mmce;
  m.groupwise = true;
  s.losses = {m};
  s.rho_grid = {0.4, 0.6};
  s.lambda_grid = {0.5, 1.0};
  s.seeds = {0, 1};
  s.base = quick(LossKind::nll, 3);
  s.jobs = 4;
  const SweepResult r = sweep(data, s);
  REQUIRE(r.logs.size() == 8);
  CHECK(r.failures.empty());
  const auto cells = expand_grid(s);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(r.logs[i].id == RunId::from(cells[i]));

  s.jobs = 1;
  const SweepResult serial = sweep(data, s);
  for (std::size_t i = 0; i < 8; ++i) CHECK(serial.logs[i].rows == r.logs[i].rows);

  // A learning rate that blows up fails its cells; the NLL cell still runs.
  LossSpec nll;
  s.losses = {nll, m};
  s.base.learning_rate = 1e300;
  s.base.epochs = 2;
  s.rho_grid = {0.5};
  s.lambda_grid = {1.0};
  s.seeds = {0};
  const SweepResult bad = sweep(data, s);
  CHECK(bad.logs.size() + bad.failures.size() == 2);
  CHECK_FALSE(bad.failures.empty());
}

TEST_CASE("summary picks the per-seed best epoch and averages over seeds") {
  std::vector<RunLog> logs;
  logs.push_back(log_for(LossKind::nll, false, 0, {row(1, 0.7, 0.20, 0.4), row(2, 0.8, 0.10, 0.2)}));
  logs.push_back(log_for(LossKind::nll, false, 1, {row(1, 0.7, 0.30, 0.4), row(2, 0.6, 0.05, 0.6)}));
  logs.push_back(log_for(LossKind::mmce, true, 0, {row(1, 0.9, 0.25, 0.1), row(2, 0.9, 0.15, 0.1)}));
  logs.push_back(log_for(LossKind::mmce, true, 1, {row(1, 0.5, 0.10, 0.3), row(10, 0.6, 0.20, 0.2)}));

  const auto rows = best_metric_summary(logs);
  std::map<std::string, SummaryRow> by;
  for (const auto& r : rows) by[r.technique] = r;
  REQUIRE(by.count("nll"));
  REQUIRE(by.count("mmce_g"));
  REQUIRE(by.count("mmce_g_ts"));

  const SummaryRow& nll = by["nll"];
  CHECK(nll.seeds == 2);
  CHECK(nll.objective == doctest::Approx(0.3));  // 0.2 and 0.4
  CHECK(nll.per_seed[0].epoch == 2);
  CHECK(nll.per_seed[1].epoch == 1);
  CHECK(nll.ece == doctest::Approx(0.2));
  CHECK(nll.pct_fair.has_value());
  CHECK(*nll.pct_fair == doctest::Approx(0.0));

  const SummaryRow& mm = by["mmce_g"];
  CHECK(mm.objective == doctest::Approx(0.15));
  CHECK(mm.per_seed[0].epoch == 1);  // tie at 0.1 goes to the earlier epoch
  CHECK(mm.per_seed[1].epoch == 10);
  CHECK(mm.per_seed[1].ece == 0.20);
  CHECK(mm.per_seed[1].acc == 0.6);
  CHECK(*mm.pct_fair == doctest::Approx((percent_change(0.1, 0.2) + percent_change(0.2, 0.4)) / 2));
  CHECK(*mm.pct_calib ==
        doctest::Approx((percent_change(0.25, 0.10) + percent_change(0.20, 0.30)) / 2));
  CHECK(*mm.pct_acc == doctest::Approx((percent_change(0.9, 0.8) + percent_change(0.6, 0.7)) / 2));

  CHECK(by["mmce_g_ts"].objective == doctest::Approx(0.075));

  SummaryOptions calib;
  calib.objective = Objective::calibration;
  for (const auto& r : best_metric_summary(logs, calib)) {
    if (r.technique == "nll" && !r.hybrid) CHECK(r.objective == doctest::Approx(0.075));
  }

  SummaryOptions slack;
  slack.accuracy_slack = 0.05;
  for (const auto& r : best_metric_summary(logs, slack)) {
    if (r.technique == "nll" && !r.hybrid) CHECK(r.per_seed[1].epoch == 1);
  }

  CHECK_THROWS_AS(best_metric_summary(std::vector<RunLog>{}), DataError);
  CHECK(parse_objective("calibration") == Objective::calibration);
  CHECK_THROWS_AS(parse_objective("speed"), ConfigError);
}

TEST_CASE("summary ignores NaN objective values") {
  std::vector<RunLog> logs;
  logs.push_back(log_for(LossKind::nll, false, 0, {row(1, 0.7, 0.2, std::nan("")), row(2, 0.7, 0.3, 0.5)}));
  const auto rows = best_metric_summary(logs);
  CHECK(rows.front().per_seed[0].epoch == 2);
}

TEST_CASE("run-log csv layout and round trip") {
  const PreparedData data = small_data(200);
  SweepConfig s;
  s.losses = {LossSpec{}};
  LossSpec m;
  m.kind = LossKind::mmce_w;
  m.groupwise = true;
  m.lambda = 1.0;
  s.losses.push_back(m);
  s.seeds = {0, 1};
  s.base = quick(LossKind::nll, 4);
  const SweepResult result = sweep(data, s);

  const fs::path a = scratch("a"), b = scratch("b");
  emit_reports(result, a);
  emit_reports(result, b);
  CHECK(tree(a) == tree(b));
  CHECK(fs::exists(a / "pareto.svg"));
  CHECK(fs::exists(a / "pareto" / "nll.csv"));
  CHECK(fs::exists(a / "pareto" / "nll_ts.csv"));
  CHECK(fs::exists(a / "pareto" / "mmce_w_g_ts.csv"));
  CHECK(fs::exists(a / "summary_fairness.csv"));
  CHECK(fs::exists(a / "summary_calibration.csv"));

  const std::string first = slurp(a / "runs" / (result.logs[0].id.str() + ".csv"));
  CHECK(first.rfind("epoch,loss,acc,ece,pe_stoch,pe_det,ece_ts,pe_stoch_ts,t0,t1\n", 0) == 0);
  CHECK(slurp(a / "pareto" / "nll.csv").rfind("pe,ece,acc,run_id,epoch\n", 0) == 0);

  const std::vector<RunLog> back = load_run_logs(a);
  REQUIRE(back.size() == result.logs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == result.logs[i].id);
    REQUIRE(back[i].rows.size() == result.logs[i].rows.size());
    for (std::size_t e = 0; e < back[i].rows.size(); ++e) {
      EpochRow expect = result.logs[i].rows[e];
      expect.val_ece = 0.0;
      expect.val_ece_ts = 0.0;
      CHECK(back[i].rows[e] == expect);
    }
  }

  const auto front = read_pareto_csv(a / "pareto" / "nll.csv");
  for (const auto& p : front) CHECK(p.run_id.rfind("nll_s", 0) == 0);
}

TEST_CASE("pareto series cover each technique and its hybrid") {
  std::vector<RunLog> logs;
  logs.push_back(log_for(LossKind::nll, false, 0, {row(1, 0.8, 0.2, 0.4)}));
  logs.push_back(log_for(LossKind::mmce, true, 0, {row(1, 0.8, 0.1, 0.5)}));
  const auto series = pareto_fronts(logs, 0.05);
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  CHECK(names == std::vector<std::string>{"nll", "nll_ts", "mmce_g", "mmce_g_ts"});
  CHECK(series[3].front.front().pe == 0.25);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({
    "dataset": {"preset": "adult"},
    "losses": ["nll", {"kind": "mmce", "groupwise": true}],
    "grid": "adult",
    "seeds": [0, 1, 2, 3, 4],
    "epochs": 20,
    "batch_size": 64,
    "ts": {"patience": 2},
    "output_dir": "runs"
  })", "/base");
  CHECK(c.dataset.source == DatasetRef::Source::fixture);
  CHECK(c.dataset.name == "adult");
  CHECK(c.sweep.rho_grid.size() == 9);
  CHECK(c.sweep.lambda_grid.size() == 12);
  CHECK(c.sweep.base.epochs == 20);
  CHECK(c.sweep.base.batch_size == 64);
  CHECK(c.sweep.base.ts.patience == 2);
  CHECK(c.output_dir == fs::path("/base/runs"));
  CHECK(expand_grid(c.sweep).size() == 5 + 9 * 12 * 5);

  const ExperimentConfig syn = parse_config(R"({
    "dataset": {"synthetic": {"samples": 300, "pr_group1": 0.74, "pr_y1_group0": 0.25,
                              "pr_y1_group1": 0.59, "cells": 4, "seed": 7, "group_feature": true}},
    "loss": {"kind": "dca", "lambda": 1}
  })");
  CHECK(syn.dataset.source == DatasetRef::Source::synthetic);
  const EncodedDataset d = load_dataset(syn.dataset);
  CHECK(d.size() == 300);
  CHECK(d.input_dim() == 6);

  auto bad = [](const char* text) { CHECK_THROWS_AS(parse_config(text), ConfigError); };
  bad("not json");
  bad(R"({"loss": "nll"})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": "nll", "epochz": 3})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": "nll", "epochs": "ten"})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": "nll", "losses": ["nll"]})");
  bad(R"({"dataset": {"preset": "nowhere"}, "loss": "nll"})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": "dca"})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": {"kind": "nll", "rho": 2}})");
  bad(R"({"dataset": {"preset": "adult"}, "loss": "nll", "epochs": 0})");
  bad(R"({"dataset": {"csv": "x.csv"}, "loss": "nll"})");
}

TEST_CASE("csv datasets borrow a preset schema") {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  write_csv(to_csv_table(generate_fixture(dataset_preset("german"))), dir / "german.csv");
  std::ofstream(dir / "config.json") << R"({"dataset": {"csv": "german.csv", "preset": "german"},
                                             "loss": "nll"})";
  const ExperimentConfig c = load_config(dir / "config.json");
  CHECK(c.dataset.source == DatasetRef::Source::csv);
  const EncodedDataset d = load_dataset(c.dataset);
  CHECK(d.size() == 1000);
  CHECK(d.input_dim() == 20);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}
