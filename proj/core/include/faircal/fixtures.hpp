#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faircal/dataset.hpp"

namespace faircal {

/// Published statistics and search grid of one benchmark dataset, plus the
/// column layout used for its bundled stand-in fixture.
struct DatasetPreset {
  std::string name;
  std::size_t size = 0;
  std::size_t dim = 0;
  double pr_group1 = 0.0;
  double pr_y1_group0 = 0.0;
  double pr_y1_group1 = 0.0;
  std::vector<double> rho_grid;

  std::string label_column;
  std::array<std::string, 2> label_values;  // index 1 is the positive class
  std::string group_column;
  std::string group_positive;
  std::string group_negative;
};

std::span<const DatasetPreset> dataset_presets();
const DatasetPreset& dataset_preset(std::string_view name);

/// Shared lambda grid for the calibration-term losses.
std::span<const double> lambda_grid_preset();

/// Per-column category counts summing to preset.dim.
std::vector<std::size_t> fixture_cardinalities(const DatasetPreset& preset);

/// Categorical stand-in for a benchmark dataset: exactly preset.size rows,
/// group and label counts rounded from the preset rates, every category of
/// every feature column present (so the vocabulary width is preset.dim), and
/// features correlated with the label.
RawDataset generate_fixture(const DatasetPreset& preset, std::uint64_t seed = 2024);

CsvTable to_csv_table(const RawDataset& raw);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace faircal
