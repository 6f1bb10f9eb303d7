#include "faircal/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "faircal/errors.hpp"
#include "faircal/rng.hpp"

namespace faircal {
namespace {

std::vector<double> grid(double lo, double hi) {
  std::vector<double> out;
  const int steps = static_cast<int>(std::lround((hi - lo) / 0.05));
  for (int i = 0; i <= steps; ++i) {
    out.push_back(std::round((lo + 0.05 * i) * 100.0) / 100.0);
  }
  return out;
}

std::vector<DatasetPreset> make_presets() {
  auto preset = [](std::string name, std::size_t size, std::size_t dim, double pa, double r0,
                   double r1, double rho_hi, std::string label, std::array<std::string, 2> values,
                   std::string group, std::string pos, std::string neg) {
    DatasetPreset p;
    p.name = std::move(name);
    p.size = size;
    p.dim = dim;
    p.pr_group1 = pa;
    p.pr_y1_group0 = r0;
    p.pr_y1_group1 = r1;
    p.rho_grid = grid(0.4, rho_hi);
    p.label_column = std::move(label);
    p.label_values = std::move(values);
    p.group_column = std::move(group);
    p.group_positive = std::move(pos);
    p.group_negative = std::move(neg);
    return p;
  };
  return {
      preset("adult", 2020, 97, 0.74, 0.25, 0.59, 0.8, "income", {"<=50K", ">50K"}, "sex",
             "Male", "Female"),
      preset("arrhythmia", 452, 279, 0.55, 0.41, 0.65, 0.6, "arrhythmia", {"0", "1"}, "sex",
             "male", "female"),
      preset("communities", 1994, 122, 0.71, 0.36, 0.84, 0.75, "high_crime", {"0", "1"}, "race",
             "white", "nonwhite"),
      preset("compas", 5278, 11, 0.6, 0.61, 0.49, 0.65, "two_year_recid", {"0", "1"}, "race",
             "African-American", "Caucasian"),
      preset("drug", 1885, 10, 0.91, 0.83, 0.79, 0.95, "user", {"0", "1"}, "ethnicity", "white",
             "other"),
      preset("german", 1000, 20, 0.85, 0.60, 0.72, 0.9, "credit", {"bad", "good"}, "age",
             "adult", "young"),
      preset("lawschool", 1823, 17, 0.54, 0.51, 0.55, 0.6, "pass_bar", {"0", "1"}, "sex", "male",
             "female"),
  };
}

}  // namespace

std::span<const DatasetPreset> dataset_presets() {
  static const std::vector<DatasetPreset> presets = make_presets();
  return presets;
}

const DatasetPreset& dataset_preset(std::string_view name) {
  for (const auto& p : dataset_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown dataset preset '" + std::string(name) + "'");
}

std::span<const double> lambda_grid_preset() {
  static const std::array<double, 12> grid = {0.2, 0.5, 1, 2, 3, 4, 5, 10, 20, 30, 40, 50};
  return grid;
}

std::vector<std::size_t> fixture_cardinalities(const DatasetPreset& preset) {
  if (preset.dim < 2) throw ConfigError("fixture: dimension must be at least 2");
  const std::size_t columns = std::max<std::size_t>(1, preset.dim / 4);
  std::vector<std::size_t> cards(columns, preset.dim / columns);
  for (std::size_t i = 0; i < preset.dim % columns; ++i) ++cards[i];
  return cards;
}

RawDataset generate_fixture(const DatasetPreset& preset, std::uint64_t seed) {
  const std::size_t n = preset.size;
  const std::vector<std::size_t> cards = fixture_cardinalities(preset);
  for (std::size_t c : cards) {
    if (c > n) throw ConfigError("fixture: more categories than rows");
  }
  const auto n1 = static_cast<std::size_t>(std::llround(preset.pr_group1 * static_cast<double>(n)));
  const std::array<std::size_t, 2> group_size = {n - n1, n1};
  const std::array<double, 2> rate = {preset.pr_y1_group0, preset.pr_y1_group1};

  struct Row {
    int group;
    int label;
  };
  std::vector<Row> skeleton;
  skeleton.reserve(n);
  for (int a = 0; a < 2; ++a) {
    const auto na = group_size[static_cast<std::size_t>(a)];
    const auto pos = static_cast<std::size_t>(
        std::llround(rate[static_cast<std::size_t>(a)] * static_cast<double>(na)));
    for (std::size_t i = 0; i < na; ++i) skeleton.push_back({a, i < pos ? 1 : 0});
  }
  Rng rng(seed);
  rng.shuffle(std::span<Row>(skeleton));

  RawDataset raw;
  for (std::size_t c = 0; c < cards.size(); ++c) raw.columns.push_back("f" + std::to_string(c));
  raw.label_column = raw.columns.size();
  raw.columns.push_back(preset.label_column);
  raw.group_column = raw.columns.size();
  raw.columns.push_back(preset.group_column);
  raw.group_positive_value = preset.group_positive;

  // Each column leans towards a label-dependent category with a column-specific strength.
  std::vector<double> strength(cards.size());
  for (auto& s : strength) s = rng.uniform(0.1, 0.5);
  raw.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& r = skeleton[i];
    std::vector<std::string> row;
    row.reserve(raw.columns.size());
    for (std::size_t c = 0; c < cards.size(); ++c) {
      std::size_t v;
      if (i < cards[c]) {
        v = i;
      } else if (rng.bernoulli(strength[c])) {
        v = (static_cast<std::size_t>(r.label) + c) % cards[c];
      } else {
        v = static_cast<std::size_t>(rng.below(cards[c]));
      }
      row.push_back("c" + std::to_string(v));
    }
    row.push_back(preset.label_values[static_cast<std::size_t>(r.label)]);
    row.push_back(r.group == 1 ? preset.group_positive : preset.group_negative);
    raw.rows.push_back(std::move(row));
  }
  return raw;
}

CsvTable to_csv_table(const RawDataset& raw) { return CsvTable{raw.columns, raw.rows}; }

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_csv_row(out, table.header);
  for (const auto& row : table.rows) write_csv_row(out, row);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace faircal
