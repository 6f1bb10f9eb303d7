#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faircal/csv.hpp"
#include "faircal/metrics.hpp"
#include "faircal/tensor.hpp"

namespace faircal {

/// Categorical rows with designated label and sensitive-group columns.
struct RawDataset {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::size_t label_column = 0;
  std::size_t group_column = 0;
  std::string group_positive_value;

  std::size_t size() const { return rows.size(); }
};

RawDataset make_raw(CsvTable table, const std::string& label_column,
                    const std::string& group_column, std::string group_positive_value);
RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::string& group_column, std::string group_positive_value);

enum class EncoderMode { vocabulary, hashing };

struct EncoderOptions {
  EncoderMode mode = EncoderMode::vocabulary;
  /// Output width in hashing mode.
  std::size_t hash_dim = 0;
  /// Also emit indicator columns for the sensitive attribute.
  bool include_group_feature = false;
};

struct Provenance {
  std::string source;
  std::string encoder_mode;
  std::size_t hash_dim = 0;
  bool group_feature = false;
  std::uint64_t seed = 0;
  std::string vocabulary_checksum;
  std::vector<std::string> label_values;
};

struct EncodedDataset {
  Tensor2 features;
  std::vector<int> labels;
  std::vector<int> groups;
  std::size_t num_classes = 0;
  Provenance provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return features.cols(); }
};

/// Multi-hot encoder. Vocabulary mode emits one indicator per distinct
/// (column, category) pair, sorted lexicographically; hashing mode maps each
/// pair to fnv1a64("column\x1f" "category") mod hash_dim. Labels map to their
/// rank among the sorted distinct label values. Empty strings are a category.
class CategoricalEncoder {
 public:
  static CategoricalEncoder fit(const RawDataset& raw, EncoderOptions options = {});

  /// Unseen label or group values raise DataError; unseen feature categories
  /// leave their column block at zero.
  EncodedDataset transform(const RawDataset& raw) const;

  std::size_t output_dim() const;
  const std::vector<std::pair<std::string, std::string>>& vocabulary() const { return vocab_; }
  const std::vector<std::string>& label_values() const { return label_values_; }
  std::string checksum() const;

 private:
  EncoderOptions options_;
  std::vector<std::string> feature_columns_;
  std::vector<std::pair<std::string, std::string>> vocab_;
  std::vector<std::string> label_values_;
  std::vector<std::string> group_values_;
};

EncodedDataset encode_multihot(const RawDataset& raw, EncoderOptions options = {});

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Disjoint index sets in ratio 6:1:1; validation and test get floor(n/8)
/// rows each and the remainder goes to train.
struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

SplitAssignment split_6_1_1(std::size_t n, std::uint64_t seed);

EncodedDataset subset(const EncodedDataset& data, std::span<const std::size_t> rows);

/// Size, d and base rates: the columns of a dataset statistics table.
struct DatasetStats {
  std::size_t size = 0;
  std::size_t dim = 0;
  BaseRates rates;

  double pr_group1() const { return rates.group1_fraction; }
  /// Pr[Y = 1 | A = a]; nullopt when group a is empty.
  std::optional<double> positive_rate(int group) const;
};

DatasetStats dataset_stats(const EncodedDataset& data);
std::string format_stats_header();
std::string format_stats_row(const std::string& name, const DatasetStats& stats);

void write_provenance(const EncodedDataset& data, const std::filesystem::path& path);

}  // namespace faircal
