// faircal command-line driver.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure (including a failed `verify` check), 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "faircal/config.hpp"
#include "faircal/csv.hpp"
#include "faircal/errors.hpp"
#include "faircal/experiment.hpp"
#include "faircal/fixtures.hpp"
#include "faircal/lemmas.hpp"
#include "faircal/reports.hpp"
#include "faircal/summary.hpp"
#include "faircal/temperature.hpp"

namespace fs = std::filesystem;
using namespace faircal;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct LogitsFile {
  Tensor2 logits;
  std::vector<int> labels;
  std::vector<int> groups;
};

// label,group,z0,...,z{K-1}
void write_logits(const fs::path& path, const Tensor2& logits, std::span<const int> labels,
                  std::span<const int> groups) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "label,group";
  for (std::size_t k = 0; k < logits.cols(); ++k) out << ",z" << k;
  out << '\n';
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out << labels[i] << ',' << groups[i];
    for (std::size_t k = 0; k < logits.cols(); ++k) out << ',' << format_double(logits(i, k));
    out << '\n';
  }
}

LogitsFile read_logits(const fs::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 4 || table.header[0] != "label" || table.header[1] != "group") {
    throw DataError("'" + path.string() + "': expected columns label,group,z0,z1,...");
  }
  const std::size_t K = table.header.size() - 2;
  LogitsFile f;
  f.logits = Tensor2(table.rows.size(), K);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const double label = parse_double(row[0]);
    const double group = parse_double(row[1]);
    if (label < 0 || label >= static_cast<double>(K) || label != static_cast<int>(label)) {
      throw DataError("'" + path.string() + "': bad label on row " + std::to_string(i + 1));
    }
    if (group != 0.0 && group != 1.0) {
      throw DataError("'" + path.string() + "': group must be 0 or 1 on row " +
                      std::to_string(i + 1));
    }
    f.labels.push_back(static_cast<int>(label));
    f.groups.push_back(static_cast<int>(group));
    for (std::size_t k = 0; k < K; ++k) f.logits(i, k) = parse_double(row[k + 2]);
  }
  return f;
}

void print_row_summary(const RunLog& log) {
  if (log.rows.empty()) return;
  const EpochRow& r = log.rows.back();
  std::printf("%s epoch %d: loss %.6f acc %.4f ece %.4f pe_stoch %.4f pe_det %.4f | ts: ece %.4f pe_stoch %.4f (T0 %.3f, T1 %.3f)\n",
              log.id.str().c_str(), r.epoch, r.loss, r.acc, r.ece, r.pe_stoch, r.pe_det,
              r.ece_ts, r.pe_stoch_ts, r.t0, r.t1);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_sweep(const fs::path& config_path, const std::string& out_override, int jobs,
              bool single, std::optional<std::uint64_t> seed, std::optional<double> rho,
              std::optional<double> lambda, const std::string& save_logits) {
  ExperimentConfig config = load_config(config_path);
  if (!out_override.empty()) config.output_dir = out_override;
  if (jobs >= 0) config.sweep.jobs = static_cast<unsigned>(jobs);
  if (seed) config.sweep.seeds = {*seed};
  if (rho) config.sweep.rho_grid = {*rho};
  if (lambda) config.sweep.lambda_grid = {*lambda};
  const auto cells = expand_grid(config.sweep);
  if (single && cells.size() != 1) {
    throw ConfigError("train runs one grid cell but the config expands to " +
                      std::to_string(cells.size()) + "; pin it with --seed/--rho/--lambda or use sweep");
  }

  const EncodedDataset data = load_dataset(config.dataset);
  const PreparedData prepared = prepare(data, config.split_seed);
  std::fprintf(stderr, "dataset %s: n=%zu d=%zu, %zu grid cells\n", config.dataset.name.c_str(),
               data.size(), data.input_dim(), cells.size());

  SweepResult result;
  if (single) {
    ModelParams params;
    try {
      result.logs.push_back(run_experiment(prepared, cells.front(), &params));
    } catch (const NumericError& e) {
      result.failures.push_back({RunId::from(cells.front()), e.what()});
    }
    if (!result.logs.empty() && !save_logits.empty()) {
      const fs::path dir = save_logits;
      write_logits(dir / "val_logits.csv", forward(params, prepared.validation.features),
                   prepared.validation.labels, prepared.validation.groups);
      write_logits(dir / "test_logits.csv", forward(params, prepared.test.features),
                   prepared.test.labels, prepared.test.groups);
    }
  } else {
    std::size_t done = 0;
    result = sweep(prepared, config.sweep, [&](const RunId& id, bool ok) {
      ++done;
      std::fprintf(stderr, "[%zu/%zu] %s %s\n", done, cells.size(), id.str().c_str(),
                   ok ? "ok" : "FAILED");
    });
  }

  ReportOptions options;
  options.title = config.dataset.name;
  options.accuracy_slack = config.accuracy_slack;
  emit_reports(result, config.output_dir, options);
  const fs::path prov_path = config.output_dir / "provenance.json";
  write_provenance(data, prov_path);
  {
    auto prov = nlohmann::ordered_json::parse(read_text(prov_path));
    prov["faircal_version"] = FAIRCAL_VERSION;
    prov["command"] = single ? "train" : "sweep";
    prov["split_seed"] = config.split_seed;
    prov["split_sizes"] = {prepared.train.size(), prepared.validation.size(), prepared.test.size()};
    std::vector<std::string> ids;
    for (const auto& c : cells) ids.push_back(RunId::from(c).str());
    prov["runs"] = ids;
    write_text(prov_path, prov.dump(2) + "\n");
  }
  write_text(config.output_dir / "config.json", read_text(config_path));

  for (const auto& log : result.logs) print_row_summary(log);
  for (const auto& f : result.failures) {
    std::fprintf(stderr, "failed: %s: %s\n", f.id.str().c_str(), f.message.c_str());
  }
  std::printf("%zu runs, %zu failures, reports in %s\n", result.logs.size(),
              result.failures.size(), config.output_dir.string().c_str());
  if (result.logs.empty() && !result.failures.empty()) return kExitNumeric;
  return 0;
}

int run_temp_fit(const fs::path& val_path, const std::string& out, double lr, int max_epochs,
                 std::size_t bins) {
  const LogitsFile val = read_logits(val_path);
  TsConfig config;
  config.learning_rate = lr;
  config.max_epochs = max_epochs;
  config.ece_bins = bins;
  const DualTsFit fit = fit_dual_temperature(val.logits, val.labels, val.groups, config);
  nlohmann::ordered_json j;
  j["t0"] = fit.temperatures.t0;
  j["t1"] = fit.temperatures.t1;
  j["chosen_epoch"] = fit.trace.chosen_epoch;
  j["stop_reason"] = std::string(to_string(fit.trace.stop_reason));
  j["val_ece_before"] = fit.trace.val_ece.front();
  j["val_ece_after"] = fit.trace.val_ece[fit.trace.chosen_epoch];
  j["group_missing"] = {fit.group_missing[0], fit.group_missing[1]};
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  std::fprintf(stderr, "T0 %.6f T1 %.6f, validation ECE %.6f -> %.6f\n", fit.temperatures.t0,
               fit.temperatures.t1, fit.trace.val_ece.front(),
               fit.trace.val_ece[fit.trace.chosen_epoch]);
  return 0;
}

int run_temp_apply(const fs::path& logits_path, const fs::path& temps_path, const std::string& out,
                   std::size_t bins) {
  const LogitsFile f = read_logits(logits_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(temps_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + temps_path.string() + "': " + e.what());
  }
  if (!j.contains("t0") || !j.contains("t1") || !j["t0"].is_number() || !j["t1"].is_number()) {
    throw ConfigError("'" + temps_path.string() + "': expected numeric t0 and t1");
  }
  const TemperaturePair pair{j["t0"].get<double>(), j["t1"].get<double>()};
  pair.validate();
  const PredictionSet raw = PredictionSet::from_logits(f.logits, f.labels, f.groups);
  const PredictionSet scaled = apply_dual_temperature(f.logits, f.labels, f.groups, pair);
  std::ostringstream s;
  s << "label,group,pred";
  for (std::size_t k = 0; k < scaled.num_classes(); ++k) s << ",p" << k;
  s << '\n';
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    s << scaled.labels[i] << ',' << scaled.groups[i] << ',' << scaled.predicted[i];
    for (std::size_t k = 0; k < scaled.num_classes(); ++k) {
      s << ',' << format_double(scaled.probs(i, k));
    }
    s << '\n';
  }
  if (out.empty()) {
    std::cout << s.str();
  } else {
    write_text(out, s.str());
  }
  std::fprintf(stderr, "accuracy %.6f, ECE %.6f -> %.6f\n", accuracy(scaled), ece(raw, bins),
               ece(scaled, bins));
  return 0;
}

int run_pareto(const fs::path& runs_dir, double slack, const std::string& out, bool svg) {
  const auto logs = load_run_logs(runs_dir);
  if (logs.empty()) throw DataError("no runs listed in '" + (runs_dir / "runs.csv").string() + "'");
  const auto fronts = pareto_fronts(logs, slack);
  const fs::path dir = out.empty() ? runs_dir / "pareto" : fs::path(out);
  for (const auto& s : fronts) {
    write_pareto_csv(s.front, dir / (s.name + ".csv"));
    std::printf("%-12s %zu points\n", s.name.c_str(), s.front.size());
    for (const auto& p : s.front) {
      std::printf("  pe %.4f ece %.4f acc %.4f  %s@%d\n", p.pe, p.ece, p.acc, p.run_id.c_str(),
                  p.epoch);
    }
  }
  if (svg) write_pareto_svg(fronts, runs_dir.filename().string(), dir / "pareto.svg");
  return 0;
}

int run_summary(const fs::path& runs_dir, const std::string& objective, bool hybrid,
                std::optional<double> slack) {
  const auto logs = load_run_logs(runs_dir);
  SummaryOptions options;
  options.objective = parse_objective(objective);
  options.include_hybrid = hybrid;
  options.accuracy_slack = slack;
  const auto rows = best_metric_summary(logs, options);
  auto pct = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%+.1f%%", *v);
    return std::string(buf);
  };
  std::printf("%-12s %5s %10s %8s %8s %8s %8s %9s %9s %9s\n", "technique", "seeds", "objective",
              "acc", "ece", "pe_stoch", "pe_det", "%fair", "%calib", "%acc");
  for (const auto& r : rows) {
    std::printf("%-12s %5zu %10.4f %8.4f %8.4f %8.4f %8.4f %9s %9s %9s\n", r.technique.c_str(),
                r.seeds, r.objective, r.acc, r.ece, r.pe_stoch, r.pe_det, pct(r.pct_fair).c_str(),
                pct(r.pct_calib).c_str(), pct(r.pct_acc).c_str());
  }
  return 0;
}

int run_verify(std::size_t cells, std::size_t n, double pa, double r0, double r1,
               double temperature, std::uint64_t seed) {
  const SyntheticSpec spec = binary_spec_with_rates(pa, r0, r1, cells, n, seed);
  LemmaOptions options;
  options.temperature = temperature;
  const LemmaReport report = verify_lemmas(spec, n, options);
  auto line = [&](const char* name, const ZeroCheck& c) {
    std::printf("%-16s %.6f  (3 sigma = %.6f)  %s\n", name, c.value, report.sigmas * c.sigma,
                c.pass ? "ok" : "NONZERO");
  };
  std::printf("oracle predictor, T=%g, n=%zu, accuracy %.4f\n", temperature, n, report.accuracy);
  line("ece", report.pooled_ece);
  line("ece[a=0]", report.group_ece[0]);
  line("ece[a=1]", report.group_ece[1]);
  line("pe_stochastic", report.pe_stochastic);
  if (report.pe_deterministic) {
    std::printf("%-16s %.6f  (not checked)\n", "pe_deterministic", *report.pe_deterministic);
  }
  std::printf("%s\n", report.pass() ? "PASS" : "FAIL");
  return report.pass() ? 0 : kExitNumeric;
}

EncodedDataset stats_dataset(const std::string& config_path, const std::string& preset,
                             const std::string& csv, const std::string& label,
                             const std::string& group, const std::string& positive,
                             std::string& name) {
  if (!config_path.empty()) {
    const ExperimentConfig config = load_config(config_path);
    name = config.dataset.name;
    return load_dataset(config.dataset);
  }
  DatasetRef ref;
  if (!preset.empty()) {
    const DatasetPreset& p = dataset_preset(preset);
    ref.name = p.name;
    ref.label_column = p.label_column;
    ref.group_column = p.group_column;
    ref.group_positive = p.group_positive;
  }
  if (!csv.empty()) {
    ref.source = DatasetRef::Source::csv;
    ref.path = csv;
    if (ref.name.empty()) ref.name = ref.path.stem().string();
  } else if (preset.empty()) {
    throw ConfigError("stats needs --config, --preset or --csv");
  }
  if (!label.empty()) ref.label_column = label;
  if (!group.empty()) ref.group_column = group;
  if (!positive.empty()) ref.group_positive = positive;
  if (ref.source == DatasetRef::Source::csv &&
      (ref.label_column.empty() || ref.group_column.empty() || ref.group_positive.empty())) {
    throw ConfigError("--csv needs --label, --group and --positive (or --preset)");
  }
  name = ref.name;
  return load_dataset(ref);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness and calibration experiments for tabular classifiers"};
  app.require_subcommand(1);

  std::string config_path, out_dir, save_logits;
  int jobs = -1;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho, lambda;

  auto* train = app.add_subcommand("train", "Train one grid cell and write its run log");
  train->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out_dir, "Output directory (overrides the config)");
  train->add_option("--seed", seed, "Use this seed only");
  train->add_option("--rho", rho, "Use this rho only");
  train->add_option("--lambda", lambda, "Use this lambda only");
  train->add_option("--save-logits", save_logits,
                    "Directory for final validation and test logits");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the rho x lambda x seed grid");
  sweep_cmd->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("-o,--out", out_dir, "Output directory (overrides the config)");
  sweep_cmd->add_option("-j,--jobs", jobs, "Worker threads (0 = all cores)");

  auto* ts = app.add_subcommand("temp-scale", "Dual temperature scaling on saved logits");
  ts->require_subcommand(1);
  std::string val_path, logits_path, temps_path, ts_out;
  double ts_lr = TsConfig{}.learning_rate;
  int ts_epochs = TsConfig{}.max_epochs;
  std::size_t bins = kDefaultBins;
  auto* fit = ts->add_subcommand("fit", "Fit (T0, T1) on validation logits");
  fit->add_option("logits", val_path, "CSV label,group,z0,...")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--out", ts_out, "Write temperatures JSON here (default stdout)");
  fit->add_option("--lr", ts_lr, "Adam learning rate on log T");
  fit->add_option("--max-epochs", ts_epochs, "Maximum Adam steps");
  fit->add_option("--bins", bins, "ECE bins");
  auto* apply = ts->add_subcommand("apply", "Scale logits with fitted temperatures");
  apply->add_option("logits", logits_path, "CSV label,group,z0,...")->required()->check(CLI::ExistingFile);
  apply->add_option("temperatures", temps_path, "JSON with t0 and t1")->required()->check(CLI::ExistingFile);
  apply->add_option("-o,--out", ts_out, "Write probabilities CSV here (default stdout)");
  apply->add_option("--bins", bins, "ECE bins");

  std::string runs_dir;
  double slack = 0.05;
  bool no_svg = false;
  auto* pareto = app.add_subcommand("pareto", "Pareto fronts from a report directory");
  pareto->add_option("runs", runs_dir, "Directory written by train or sweep")->required()->check(CLI::ExistingDirectory);
  pareto->add_option("--slack", slack, "Accuracy slack against the best accuracy");
  pareto->add_option("-o,--out", out_dir, "Output directory (default <runs>/pareto)");
  pareto->add_flag("--no-svg", no_svg, "Skip the SVG plot");

  std::string objective = "fairness";
  bool no_hybrid = false;
  std::optional<double> summary_slack;
  auto* summary = app.add_subcommand("summary", "Best-over-seeds table from a report directory");
  summary->add_option("runs", runs_dir, "Directory written by train or sweep")->required()->check(CLI::ExistingDirectory);
  summary->add_option("--objective", objective, "fairness | fairness_deterministic | calibration");
  summary->add_flag("--no-hybrid", no_hybrid, "Omit the _ts rows");
  summary->add_option("--slack", summary_slack, "Only epochs within this accuracy of the best");

  std::size_t cells = 4, samples = 100000;
  double pa = 0.5, r0 = 0.2, r1 = 0.7, temperature = 1.0;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Check that an oracle predictor is calibrated and fair");
  verify->add_option("--cells", cells, "Feature cells");
  verify->add_option("-n,--samples", samples, "Sample count (>= 10000)");
  verify->add_option("--pa", pa, "Pr[A=1]");
  verify->add_option("--r0", r0, "Pr[Y=1|A=0]");
  verify->add_option("--r1", r1, "Pr[Y=1|A=1]");
  verify->add_option("--temperature", temperature, "Sharpen the oracle (T < 1 miscalibrates)");
  verify->add_option("--seed", verify_seed, "Sampling seed");

  std::string preset, csv, label, group, positive;
  bool all_presets = false;
  auto* stats = app.add_subcommand("stats", "Size, d and base rates of a dataset");
  stats->add_option("--config", config_path, "Take the dataset from a config");
  stats->add_option("--preset", preset, "Bundled fixture, or column schema for --csv");
  stats->add_flag("--all", all_presets, "Every bundled fixture");
  stats->add_option("--csv", csv, "CSV file")->check(CLI::ExistingFile);
  stats->add_option("--label", label, "Label column");
  stats->add_option("--group", group, "Sensitive attribute column");
  stats->add_option("--positive", positive, "Group value mapped to A=1");

  auto* synth = app.add_subcommand("synth", "Write bundled fixture CSVs");
  std::string synth_out = "data/fixtures";
  synth->add_option("--preset", preset, "One preset (default all)");
  synth->add_option("-o,--out", synth_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      return run_sweep(config_path, out_dir, -1, true, seed, rho, lambda, save_logits);
    }
    if (*sweep_cmd) {
      return run_sweep(config_path, out_dir, jobs, false, {}, {}, {}, "");
    }
    if (*fit) return run_temp_fit(val_path, ts_out, ts_lr, ts_epochs, bins);
    if (*apply) return run_temp_apply(logits_path, temps_path, ts_out, bins);
    if (*pareto) return run_pareto(runs_dir, slack, out_dir, !no_svg);
    if (*summary) return run_summary(runs_dir, objective, !no_hybrid, summary_slack);
    if (*verify) return run_verify(cells, samples, pa, r0, r1, temperature, verify_seed);
    if (*stats) {
      if (all_presets) {
        std::printf("%s\n", format_stats_header().c_str());
        for (const auto& p : dataset_presets()) {
          const EncodedDataset data = encode_multihot(generate_fixture(p));
          std::printf("%s\n", format_stats_row(p.name, dataset_stats(data)).c_str());
        }
        return 0;
      }
      std::string name;
      const EncodedDataset data =
          stats_dataset(config_path, preset, csv, label, group, positive, name);
      std::printf("%s\n", format_stats_header().c_str());
      std::printf("%s\n", format_stats_row(name, dataset_stats(data)).c_str());
      return 0;
    }
    if (*synth) {
      if (!preset.empty()) dataset_preset(preset);
      for (const auto& p : dataset_presets()) {
        if (!preset.empty() && p.name != preset) continue;
        const fs::path path = fs::path(synth_out) / (p.name + ".csv");
        write_csv(to_csv_table(generate_fixture(p)), path);
        std::printf("wrote %s\n", path.string().c_str());
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
