#include "faircal/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "faircal/errors.hpp"
#include "faircal/rng.hpp"

namespace faircal {

namespace {

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        const char* role) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw DataError(std::string("missing ") + role + " column '" + name + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RawDataset make_raw(CsvTable table, const std::string& label_column,
                    const std::string& group_column, std::string group_positive_value) {
  if (table.rows.empty()) throw DataError("dataset has a header but no rows");
  RawDataset raw;
  raw.label_column = find_column(table.header, label_column, "label");
  raw.group_column = find_column(table.header, group_column, "group");
  if (raw.label_column == raw.group_column) {
    throw DataError("label and group columns must differ");
  }
  raw.columns = std::move(table.header);
  raw.rows = std::move(table.rows);
  raw.group_positive_value = std::move(group_positive_value);
  return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::string& group_column, std::string group_positive_value) {
  try {
    return make_raw(read_csv(path), label_column, group_column, std::move(group_positive_value));
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.rfind(path.string(), 0) == 0) throw;
    throw DataError(path.string() + ": " + what);
  }
}

CategoricalEncoder CategoricalEncoder::fit(const RawDataset& raw, EncoderOptions options) {
  if (options.mode == EncoderMode::hashing && options.hash_dim == 0) {
    throw ConfigError("hashing encoder needs hash_dim > 0");
  }
  CategoricalEncoder enc;
  enc.options_ = options;
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < raw.columns.size(); ++c) {
    if (c == raw.label_column) continue;
    if (c == raw.group_column && !options.include_group_feature) continue;
    feature_idx.push_back(c);
    enc.feature_columns_.push_back(raw.columns[c]);
  }
  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::string> labels;
  std::set<std::string> groups;
  for (const auto& row : raw.rows) {
    for (std::size_t c : feature_idx) pairs.emplace(raw.columns[c], row[c]);
    labels.insert(row[raw.label_column]);
    groups.insert(row[raw.group_column]);
  }
  if (labels.size() < 2) throw DataError("label column has fewer than 2 distinct values");
  enc.vocab_.assign(pairs.begin(), pairs.end());
  enc.label_values_.assign(labels.begin(), labels.end());
  enc.group_values_.assign(groups.begin(), groups.end());
  return enc;
}

std::size_t CategoricalEncoder::output_dim() const {
  return options_.mode == EncoderMode::hashing ? options_.hash_dim : vocab_.size();
}

std::string CategoricalEncoder::checksum() const {
  std::uint64_t h = fnv1a64(options_.mode == EncoderMode::hashing ? "hashing" : "vocabulary");
  for (const auto& [col, cat] : vocab_) {
    h = fnv1a64(col, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(cat, h);
    h = fnv1a64(std::string_view("\x1e", 1), h);
  }
  for (const auto& label : label_values_) h = fnv1a64(label, fnv1a64("\x1d", h));
  return hex64(h);
}

EncodedDataset CategoricalEncoder::transform(const RawDataset& raw) const {
  std::vector<std::size_t> feature_idx;
  for (const auto& name : feature_columns_) {
    feature_idx.push_back(find_column(raw.columns, name, "feature"));
  }
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (std::size_t j = 0; j < vocab_.size(); ++j) slot.emplace(vocab_[j], j);

  const std::size_t n = raw.size();
  const std::size_t d = output_dim();
  EncodedDataset out;
  out.features = Tensor2(n, d);
  out.labels.resize(n);
  out.groups.resize(n);
  out.num_classes = label_values_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = raw.rows[i];
    for (std::size_t c : feature_idx) {
      if (options_.mode == EncoderMode::hashing) {
        const std::string key = raw.columns[c] + '\x1f' + row[c];
        out.features(i, fnv1a64(key) % d) = 1.0;
      } else if (auto it = slot.find({raw.columns[c], row[c]}); it != slot.end()) {
        out.features(i, it->second) = 1.0;
      }
    }
    const std::string& label = row[raw.label_column];
    auto lit = std::lower_bound(label_values_.begin(), label_values_.end(), label);
    if (lit == label_values_.end() || *lit != label) {
      throw DataError("unseen label value '" + label + "' in row " + std::to_string(i + 1));
    }
    out.labels[i] = static_cast<int>(lit - label_values_.begin());
    const std::string& group = row[raw.group_column];
    if (!std::binary_search(group_values_.begin(), group_values_.end(), group)) {
      throw DataError("unseen group value '" + group + "' in row " + std::to_string(i + 1));
    }
    out.groups[i] = group == raw.group_positive_value ? 1 : 0;
  }
  out.provenance.encoder_mode = options_.mode == EncoderMode::hashing ? "hashing" : "vocabulary";
  out.provenance.hash_dim = options_.mode == EncoderMode::hashing ? options_.hash_dim : 0;
  out.provenance.group_feature = options_.include_group_feature;
  out.provenance.vocabulary_checksum = checksum();
  out.provenance.label_values = label_values_;
  return out;
}

EncodedDataset encode_multihot(const RawDataset& raw, EncoderOptions options) {
  return CategoricalEncoder::fit(raw, options).transform(raw);
}

SplitAssignment split_6_1_1(std::size_t n, std::uint64_t seed) {
  if (n < 8) throw DataError("split_6_1_1: need at least 8 rows, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t holdout = n / 8;
  const std::size_t train = n - 2 * holdout;
  SplitAssignment split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(train),
                          order.begin() + static_cast<std::ptrdiff_t>(train + holdout));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train + holdout), order.end());
  return split;
}

EncodedDataset subset(const EncodedDataset& data, std::span<const std::size_t> rows) {
  EncodedDataset out;
  out.features = Tensor2(rows.size(), data.input_dim());
  out.num_classes = data.num_classes;
  out.provenance = data.provenance;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= data.size()) throw ShapeError("subset: row index out of range");
    auto src = data.features.row(rows[j]);
    std::copy(src.begin(), src.end(), out.features.row(j).begin());
    out.labels.push_back(data.labels[rows[j]]);
    out.groups.push_back(data.groups[rows[j]]);
  }
  return out;
}

std::optional<double> DatasetStats::positive_rate(int group) const {
  const auto& r = rates.class_given_group[static_cast<std::size_t>(group)];
  if (!r || r->size() < 2) return std::nullopt;
  return (*r)[1];
}

DatasetStats dataset_stats(const EncodedDataset& data) {
  if (data.size() == 0) throw DataError("dataset_stats: empty dataset");
  DatasetStats stats;
  stats.size = data.size();
  stats.dim = data.input_dim();
  stats.rates = base_rates(data.labels, data.groups, std::max<std::size_t>(data.num_classes, 2));
  return stats;
}

std::string format_stats_header() { return "dataset,size,d,pr_a1,pr_y1_a0,pr_y1_a1"; }

std::string format_stats_row(const std::string& name, const DatasetStats& stats) {
  auto cell = [](std::optional<double> v) {
    if (!v) return std::string("undefined");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return std::string(buf);
  };
  return csv_escape(name) + "," + std::to_string(stats.size) + "," + std::to_string(stats.dim) +
         "," + cell(stats.pr_group1()) + "," + cell(stats.positive_rate(0)) + "," +
         cell(stats.positive_rate(1));
}

void write_provenance(const EncodedDataset& data, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["source"] = data.provenance.source;
  j["encoder_mode"] = data.provenance.encoder_mode;
  j["hash_dim"] = data.provenance.hash_dim;
  j["group_feature"] = data.provenance.group_feature;
  j["seed"] = data.provenance.seed;
  j["vocabulary_checksum"] = data.provenance.vocabulary_checksum;
  j["label_values"] = data.provenance.label_values;
  j["rows"] = data.size();
  j["d"] = data.input_dim();
  j["num_classes"] = data.num_classes;
  std::ofstream out(path);
  if (!out) throw Error("cannot write provenance file " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace faircal
