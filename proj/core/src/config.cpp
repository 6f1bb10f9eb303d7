#include "faircal/config.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "faircal/errors.hpp"
#include "faircal/fixtures.hpp"
#include "json.hpp"

namespace faircal {
namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& where, std::set<std::string> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return get<T>(obj, key, where, T{});
}

LossSpec parse_loss(const json& j, const std::string& where) {
  LossSpec spec;
  if (j.is_string()) {
    spec.kind = parse_loss_kind(j.get<std::string>());
    return spec;
  }
  allow_keys(j, where, {"kind", "groupwise", "rho", "lambda", "alpha", "focal_gamma",
                        "kernel_gamma"});
  spec.kind = parse_loss_kind(require<std::string>(j, "kind", where));
  spec.groupwise = get<bool>(j, "groupwise", where, false);
  spec.rho = get<double>(j, "rho", where, spec.rho);
  if (j.contains("lambda")) spec.lambda = get<double>(j, "lambda", where, 0.0);
  spec.alpha = get<double>(j, "alpha", where, spec.alpha);
  spec.focal_gamma = get<double>(j, "focal_gamma", where, spec.focal_gamma);
  spec.kernel_gamma = get<double>(j, "kernel_gamma", where, spec.kernel_gamma);
  return spec;
}

SyntheticSpec parse_synthetic(const json& j) {
  const std::string where = "dataset.synthetic";
  allow_keys(j, where, {"samples", "pr_group1", "pr_y1_group0", "pr_y1_group1", "cells",
                        "seed", "group_feature", "conditional", "cell_weights", "num_classes"});
  const auto samples = require<std::size_t>(j, "samples", where);
  const auto seed = get<std::uint64_t>(j, "seed", where, 0);
  SyntheticSpec spec;
  if (j.contains("conditional")) {
    spec.num_classes = get<std::size_t>(j, "num_classes", where, 2);
    spec.pr_group1 = require<double>(j, "pr_group1", where);
    using Cond = std::vector<std::array<std::vector<double>, 2>>;
    spec.conditional = get<Cond>(j, "conditional", where, {});
    spec.cells = spec.conditional.size();
    spec.samples = samples;
    spec.seed = seed;
  } else {
    spec = binary_spec_with_rates(require<double>(j, "pr_group1", where),
                                  require<double>(j, "pr_y1_group0", where),
                                  require<double>(j, "pr_y1_group1", where),
                                  get<std::size_t>(j, "cells", where, 8), samples, seed);
  }
  if (j.contains("cell_weights")) {
    spec.cell_weights = get<std::array<std::vector<double>, 2>>(j, "cell_weights", where, {});
  }
  spec.group_feature = get<bool>(j, "group_feature", where, false);
  spec.validate();
  return spec;
}

DatasetRef parse_dataset(const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "dataset";
  allow_keys(j, where, {"preset", "csv", "label", "group", "positive", "encoder", "hash_dim",
                        "group_feature", "fixture_seed", "synthetic", "name"});
  DatasetRef ref;
  const DatasetPreset* preset = nullptr;
  if (j.contains("preset")) preset = &dataset_preset(require<std::string>(j, "preset", where));
  if (j.contains("synthetic")) {
    ref.source = DatasetRef::Source::synthetic;
    ref.synthetic = parse_synthetic(j.at("synthetic"));
    ref.name = "synthetic";
  } else if (j.contains("csv")) {
    ref.source = DatasetRef::Source::csv;
    ref.path = require<std::string>(j, "csv", where);
    if (ref.path.is_relative() && !base_dir.empty()) ref.path = base_dir / ref.path;
    ref.name = ref.path.stem().string();
  } else if (preset != nullptr) {
    ref.source = DatasetRef::Source::fixture;
    ref.name = preset->name;
  } else {
    throw ConfigError("dataset: give one of 'preset', 'csv' or 'synthetic'");
  }
  if (preset != nullptr) {
    ref.label_column = preset->label_column;
    ref.group_column = preset->group_column;
    ref.group_positive = preset->group_positive;
    if (ref.source != DatasetRef::Source::synthetic) ref.name = preset->name;
  }
  ref.label_column = get<std::string>(j, "label", where, ref.label_column);
  ref.group_column = get<std::string>(j, "group", where, ref.group_column);
  ref.group_positive = get<std::string>(j, "positive", where, ref.group_positive);
  ref.name = get<std::string>(j, "name", where, ref.name);
  ref.fixture_seed = get<std::uint64_t>(j, "fixture_seed", where, ref.fixture_seed);
  const auto mode = get<std::string>(j, "encoder", where, "vocabulary");
  if (mode == "vocabulary") {
    ref.encoder.mode = EncoderMode::vocabulary;
  } else if (mode == "hashing") {
    ref.encoder.mode = EncoderMode::hashing;
    ref.encoder.hash_dim = require<std::size_t>(j, "hash_dim", where);
    if (ref.encoder.hash_dim == 0) throw ConfigError("dataset.hash_dim must be positive");
  } else {
    throw ConfigError("dataset.encoder: expected 'vocabulary' or 'hashing'");
  }
  ref.encoder.include_group_feature = get<bool>(j, "group_feature", where, false);
  if (ref.source == DatasetRef::Source::csv &&
      (ref.label_column.empty() || ref.group_column.empty() || ref.group_positive.empty())) {
    throw ConfigError("dataset: a csv source needs 'label', 'group' and 'positive' (or a preset)");
  }
  return ref;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  allow_keys(root, where, {"dataset", "split_seed", "loss", "losses", "grid", "rho_grid",
                           "lambda_grid", "seeds", "epochs", "learning_rate", "ece_bins",
                           "batch_size", "temperature_scaling", "ts", "jobs", "output_dir",
                           "accuracy_slack"});
  ExperimentConfig config;
  if (!root.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  config.dataset = parse_dataset(root.at("dataset"), base_dir);
  config.split_seed = get<std::uint64_t>(root, "split_seed", where, 0);

  SweepConfig& sweep = config.sweep;
  if (root.contains("loss") == root.contains("losses")) {
    throw ConfigError("config: give exactly one of 'loss' and 'losses'");
  }
  if (root.contains("loss")) {
    sweep.losses.push_back(parse_loss(root.at("loss"), "loss"));
  } else {
    const json& list = root.at("losses");
    if (!list.is_array() || list.empty()) throw ConfigError("losses: expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      sweep.losses.push_back(parse_loss(list[i], "losses[" + std::to_string(i) + "]"));
    }
  }
  if (root.contains("grid")) {
    const DatasetPreset& preset = dataset_preset(require<std::string>(root, "grid", where));
    sweep.rho_grid = preset.rho_grid;
    const auto lambdas = lambda_grid_preset();
    sweep.lambda_grid.assign(lambdas.begin(), lambdas.end());
  }
  sweep.rho_grid = get<std::vector<double>>(root, "rho_grid", where, sweep.rho_grid);
  sweep.lambda_grid = get<std::vector<double>>(root, "lambda_grid", where, sweep.lambda_grid);
  if (root.contains("rho_grid") && sweep.rho_grid.empty()) throw ConfigError("rho_grid is empty");
  if (root.contains("lambda_grid") && sweep.lambda_grid.empty()) {
    throw ConfigError("lambda_grid is empty");
  }
  sweep.seeds = get<std::vector<std::uint64_t>>(root, "seeds", where, {0});

  TrainingConfig& base = sweep.base;
  base.epochs = get<int>(root, "epochs", where, base.epochs);
  base.learning_rate = get<double>(root, "learning_rate", where, base.learning_rate);
  base.ece_bins = get<std::size_t>(root, "ece_bins", where, base.ece_bins);
  base.batch_size = get<std::size_t>(root, "batch_size", where, base.batch_size);
  base.temperature_scaling = get<bool>(root, "temperature_scaling", where, true);
  if (root.contains("ts")) {
    const json& ts = root.at("ts");
    allow_keys(ts, "ts", {"learning_rate", "max_epochs", "patience"});
    base.ts.learning_rate = get<double>(ts, "learning_rate", "ts", base.ts.learning_rate);
    base.ts.max_epochs = get<int>(ts, "max_epochs", "ts", base.ts.max_epochs);
    base.ts.patience = get<int>(ts, "patience", "ts", base.ts.patience);
  }
  sweep.jobs = get<unsigned>(root, "jobs", where, 1);
  config.output_dir = get<std::string>(root, "output_dir", where, "out");
  if (config.output_dir.is_relative() && !base_dir.empty()) {
    config.output_dir = base_dir / config.output_dir;
  }
  config.accuracy_slack = get<double>(root, "accuracy_slack", where, 0.05);
  if (!(config.accuracy_slack >= 0.0)) throw ConfigError("accuracy_slack must be non-negative");
  sweep.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

EncodedDataset load_dataset(const DatasetRef& ref) {
  switch (ref.source) {
    case DatasetRef::Source::synthetic:
      return generate_synthetic(ref.synthetic).data;
    case DatasetRef::Source::fixture: {
      const DatasetPreset& preset = dataset_preset(ref.name);
      EncodedDataset data = encode_multihot(generate_fixture(preset, ref.fixture_seed), ref.encoder);
      data.provenance.source = "fixture:" + preset.name;
      data.provenance.seed = ref.fixture_seed;
      return data;
    }
    case DatasetRef::Source::csv: {
      EncodedDataset data = encode_multihot(
          load_csv(ref.path, ref.label_column, ref.group_column, ref.group_positive), ref.encoder);
      data.provenance.source = ref.path.string();
      return data;
    }
  }
  throw ConfigError("dataset: unknown source");
}

}  // namespace faircal
