#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "faircal/dataset.hpp"
#include "faircal/experiment.hpp"
#include "faircal/synthetic.hpp"

namespace faircal {

/// Where the rows come from. A CSV may borrow its column schema from a preset.
struct DatasetRef {
  enum class Source { csv, fixture, synthetic };
  Source source = Source::fixture;
  std::string name;
  std::filesystem::path path;
  std::string label_column;
  std::string group_column;
  std::string group_positive;
  EncoderOptions encoder;
  std::uint64_t fixture_seed = 2024;
  SyntheticSpec synthetic;
};

struct ExperimentConfig {
  DatasetRef dataset;
  std::uint64_t split_seed = 0;
  SweepConfig sweep;
  std::filesystem::path output_dir = "out";
  double accuracy_slack = 0.05;
};

/// Parses one JSON document. Relative paths are resolved against base_dir.
/// Unknown keys, wrong types and invalid values raise ConfigError.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads and encodes the referenced dataset.
EncodedDataset load_dataset(const DatasetRef& ref);

}  // namespace faircal
