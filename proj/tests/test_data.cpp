#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "faircal/csv.hpp"
#include "faircal/dataset.hpp"
#include "faircal/errors.hpp"
#include "faircal/fixtures.hpp"
#include "faircal/synthetic.hpp"

using namespace faircal;

namespace {

RawDataset raw_from(const std::string& text, const std::string& label = "y",
                    const std::string& group = "g", const std::string& positive = "m") {
  return make_raw(parse_csv(text), label, group, positive);
}

double sigma(double p, std::size_t n) { return std::sqrt(p * (1 - p) / static_cast<double>(n)); }

}  // namespace

TEST_CASE("csv parsing handles quoting and line endings") {
  const CsvTable t = parse_csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\n2,\"multi\nline\",\n");
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[0][2] == "say \"hi\"");
  CHECK(t.rows[1][1] == "multi\nline");
  CHECK(t.rows[1][2] == "");

  CHECK(parse_csv("a\n1").rows.size() == 1);
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a\n\"open\n"), DataError);
}

TEST_CASE("csv escaping round-trips") {
  for (std::string field : {"plain", "with,comma", "with \"quote\"", "line\nbreak", ""}) {
    std::ostringstream out;
    const std::vector<std::string> row = {"h", field};
    write_csv_row(out, row);
    const CsvTable back = parse_csv(out.str() + out.str());
    CHECK(back.header[1] == field);
  }
  CHECK(csv_escape("plain") == "plain");
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0}) CHECK(parse_double(format_double(v)) == v);
  CHECK(std::isnan(parse_double(format_double(std::nan("")))));
  CHECK_THROWS_AS(parse_double("abc"), DataError);
}

TEST_CASE("raw datasets need their label and group columns") {
  CHECK_THROWS_AS(raw_from("x,g\nred,m\n"), DataError);
  CHECK_THROWS_AS(raw_from("x,y\nred,1\n"), DataError);
  CHECK_THROWS_AS(raw_from("x,y,g\n"), DataError);
  CHECK_THROWS_AS(make_raw(parse_csv("y,g\n1,m\n"), "y", "y", "m"), DataError);
}

TEST_CASE("multi-hot encoding") {
  SUBCASE("one feature with two categories") {
    const EncodedDataset e = encode_multihot(raw_from("colour,y,g\nred,0,m\nblue,1,f\nred,1,m\n"));
    REQUIRE(e.input_dim() == 2);
    // blue sorts before red
    CHECK(e.features(0, 0) == 0.0);
    CHECK(e.features(0, 1) == 1.0);
    CHECK(e.features(1, 0) == 1.0);
    CHECK(e.features(1, 1) == 0.0);
    CHECK(e.labels == std::vector<int>{0, 1, 1});
    CHECK(e.groups == std::vector<int>{1, 0, 1});
    CHECK(e.num_classes == 2);
  }
  SUBCASE("two features with two and three categories") {
    const RawDataset raw =
        raw_from("a,b,y,g\nx,p,no,m\ny,q,yes,f\nx,r,no,f\ny,p,yes,m\n");
    const EncodedDataset e = encode_multihot(raw);
    CHECK(e.input_dim() == 5);
    for (std::size_t i = 0; i < e.size(); ++i) {
      double row = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double v = e.features(i, j);
        CHECK((v == 0.0 || v == 1.0));
        row += v;
      }
      CHECK(row == 2.0);
    }
    CHECK(e.labels == std::vector<int>{0, 1, 0, 1});

    const EncodedDataset again = encode_multihot(raw);
    CHECK(again.features == e.features);
    CHECK(again.provenance.vocabulary_checksum == e.provenance.vocabulary_checksum);
  }
  SUBCASE("group feature columns") {
    EncoderOptions opts;
    opts.include_group_feature = true;
    const EncodedDataset e = encode_multihot(raw_from("c,y,g\nu,0,m\nv,1,f\n"), opts);
    CHECK(e.input_dim() == 4);
    CHECK(e.provenance.group_feature);
  }
}

TEST_CASE("distinct rows encode to distinct vectors") {
  const RawDataset raw = raw_from("a,b,y,g\nx,p,0,m\nx,q,0,m\ny,p,0,m\ny,q,1,f\n");
  const EncodedDataset e = encode_multihot(raw);
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<double> row(e.features.cols());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = e.features(i, j);
    seen.insert(row);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("a fitted encoder rejects unseen labels and groups") {
  const CategoricalEncoder enc = CategoricalEncoder::fit(raw_from("c,y,g\nu,0,m\nv,1,f\n"));
  CHECK_THROWS_AS(enc.transform(raw_from("c,y,g\nu,2,m\n")), DataError);
  CHECK_THROWS_AS(enc.transform(raw_from("c,y,g\nu,0,x\n")), DataError);
  const EncodedDataset unseen = enc.transform(raw_from("c,y,g\nw,0,m\n"));
  CHECK(unseen.features(0, 0) == 0.0);
  CHECK(unseen.features(0, 1) == 0.0);
}

TEST_CASE("hashing mode has a fixed width and records itself") {
  const RawDataset raw = raw_from("a,b,y,g\nx,p,0,m\ny,q,1,f\nz,r,0,f\n");
  EncoderOptions opts;
  opts.mode = EncoderMode::hashing;
  opts.hash_dim = 7;
  const EncodedDataset e = encode_multihot(raw, opts);
  CHECK(e.input_dim() == 7);
  CHECK(e.provenance.encoder_mode == "hashing");
  CHECK(e.provenance.hash_dim == 7);
  const std::size_t slot = fnv1a64("a\x1fx") % 7;
  CHECK(e.features(0, slot) >= 1.0);
  opts.hash_dim = 0;
  CHECK_THROWS_AS(encode_multihot(raw, opts), ConfigError);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("six-one-one split") {
  auto sizes = [](const SplitAssignment& s) {
    return std::vector<std::size_t>{s.train.size(), s.validation.size(), s.test.size()};
  };
  CHECK(sizes(split_6_1_1(800, 1)) == std::vector<std::size_t>{600, 100, 100});
  CHECK(sizes(split_6_1_1(801, 1)) == std::vector<std::size_t>{601, 100, 100});
  CHECK(sizes(split_6_1_1(8, 1)) == std::vector<std::size_t>{6, 1, 1});
  CHECK_THROWS_AS(split_6_1_1(7, 1), DataError);

  for (std::size_t n : {8, 9, 15, 16, 100, 1001}) {
    const SplitAssignment s = split_6_1_1(n, 99);
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
    CHECK(all.size() == n);
  }
  const SplitAssignment a = split_6_1_1(500, 3), b = split_6_1_1(500, 3), c = split_6_1_1(500, 4);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);
}

TEST_CASE("synthetic generator") {
  SUBCASE("all-ones conditional gives all-ones labels") {
    SyntheticSpec spec = binary_spec_with_rates(0.5, 1.0, 1.0, 3, 500, 1);
    const SyntheticSample s = generate_synthetic(spec);
    CHECK(std::all_of(s.data.labels.begin(), s.data.labels.end(), [](int y) { return y == 1; }));
    CHECK(spec.deterministic());
  }
  SUBCASE("group fraction within three sigma") {
    const SyntheticSample s = generate_synthetic(binary_spec_with_rates(0.74, 0.25, 0.59, 4, 100000, 8));
    const DatasetStats st = dataset_stats(s.data);
    CHECK(std::abs(st.pr_group1() - 0.74) < 3 * sigma(0.74, 100000));
    CHECK(st.dim == 4);
  }
  SUBCASE("fixed seed reproduces the dataset") {
    const auto spec = binary_spec_with_rates(0.6, 0.3, 0.5, 5, 300, 17);
    const SyntheticSample a = generate_synthetic(spec), b = generate_synthetic(spec);
    CHECK(a.data.features == b.data.features);
    CHECK(a.data.labels == b.data.labels);
    CHECK(a.cells == b.cells);
    auto other = spec;
    other.seed = 18;
    CHECK(generate_synthetic(other).data.labels != a.data.labels);
  }
  SUBCASE("one-hot cells plus optional group columns") {
    auto spec = binary_spec_with_rates(0.5, 0.3, 0.6, 3, 50, 2);
    spec.group_feature = true;
    const SyntheticSample s = generate_synthetic(spec);
    REQUIRE(s.data.input_dim() == 5);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      CHECK(s.data.features(i, s.cells[i]) == 1.0);
      CHECK(s.data.features(i, 3 + static_cast<std::size_t>(s.data.groups[i])) == 1.0);
    }
  }
  SUBCASE("degenerate specs are rejected") {
    SyntheticSpec spec;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    CHECK_THROWS_AS(binary_spec_with_rates(0.5, 1.2, 0.5, 2, 10, 0), ConfigError);
  }
}

TEST_CASE("prescribed population rates are exact") {
  const SyntheticSpec spec = binary_spec_with_rates(0.74, 0.25, 0.59, 8, 10, 0);
  CHECK(spec.class_rate(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(spec.class_rate(1, 1) == doctest::Approx(0.59).epsilon(1e-12));
  CHECK_FALSE(spec.deterministic());
}

TEST_CASE("empirical conditionals converge at the square-root rate") {
  const double p0 = 0.25, p1 = 0.59, pa = 0.74;
  for (std::size_t n : {1000, 10000, 100000}) {
    const SyntheticSample s = generate_synthetic(binary_spec_with_rates(pa, p0, p1, 4, n, 31));
    const DatasetStats st = dataset_stats(s.data);
    CAPTURE(n);
    const double n1 = pa * static_cast<double>(n), n0 = static_cast<double>(n) - n1;
    CHECK(std::abs(*st.positive_rate(0) - p0) < 3 * sigma(p0, static_cast<std::size_t>(n0)));
    CHECK(std::abs(*st.positive_rate(1) - p1) < 3 * sigma(p1, static_cast<std::size_t>(n1)));
    CHECK(std::abs(st.pr_group1() - pa) < 3 * sigma(pa, n));
  }
}

TEST_CASE("dataset statistics") {
  const EncodedDataset e = encode_multihot(raw_from("c,y,g\nu,0,m\nv,1,m\nu,1,f\nv,1,m\n"));
  const DatasetStats st = dataset_stats(e);
  CHECK(st.size == 4);
  CHECK(st.dim == 2);
  CHECK(st.pr_group1() == 0.75);
  CHECK(*st.positive_rate(0) == 1.0);
  CHECK(*st.positive_rate(1) == doctest::Approx(2.0 / 3.0));
  CHECK(format_stats_row("toy", st) == "toy,4,2,0.75,1.00,0.67");
  CHECK(format_stats_header() == "dataset,size,d,pr_a1,pr_y1_a0,pr_y1_a1");

  const DatasetStats one = dataset_stats(encode_multihot(raw_from("c,y,g\nu,0,m\nv,1,m\n")));
  CHECK_FALSE(one.positive_rate(0).has_value());
  CHECK_FALSE(one.rates.complete());
}

TEST_CASE("bundled fixtures reproduce their statistics") {
  REQUIRE(dataset_presets().size() == 7);
  for (const DatasetPreset& p : dataset_presets()) {
    CAPTURE(p.name);
    const RawDataset raw = generate_fixture(p);
    const EncodedDataset e = encode_multihot(raw);
    const DatasetStats st = dataset_stats(e);
    CHECK(st.size == p.size);
    CHECK(st.dim == p.dim);
    CHECK(std::abs(st.pr_group1() - p.pr_group1) <= 0.005 + 1e-12);
    CHECK(std::abs(*st.positive_rate(0) - p.pr_y1_group0) <= 0.005 + 1e-12);
    CHECK(std::abs(*st.positive_rate(1) - p.pr_y1_group1) <= 0.005 + 1e-12);
    CHECK(e.labels.size() == p.size);
  }
  const DatasetStats compas = dataset_stats(encode_multihot(generate_fixture(dataset_preset("compas"))));
  CHECK(std::abs(*compas.positive_rate(1) - 0.49) <= 0.01);
  const DatasetStats adult = dataset_stats(encode_multihot(generate_fixture(dataset_preset("adult"))));
  CHECK(adult.size == 2020);
  CHECK(format_stats_row("adult", adult) == "adult,2020,97,0.74,0.25,0.59");
  CHECK_THROWS_AS(dataset_preset("mnist"), ConfigError);
}

TEST_CASE("fixtures are deterministic and survive a csv round trip") {
  const DatasetPreset& p = dataset_preset("german");
  const RawDataset a = generate_fixture(p, 5), b = generate_fixture(p, 5);
  CHECK(a.rows == b.rows);
  CHECK(generate_fixture(p, 6).rows != a.rows);

  const auto dir = std::filesystem::temp_directory_path() / "faircal_test_data";
  std::filesystem::create_directories(dir);
  write_csv(to_csv_table(a), dir / "german.csv");
  const RawDataset back = load_csv(dir / "german.csv", p.label_column, p.group_column, p.group_positive);
  CHECK(back.rows == a.rows);
  CHECK(encode_multihot(back).features == encode_multihot(a).features);
}

TEST_CASE("provenance sidecar") {
  const EncodedDataset e = encode_multihot(raw_from("c,y,g\nu,0,m\nv,1,f\n"));
  const auto path = std::filesystem::temp_directory_path() / "faircal_provenance.json";
  write_provenance(e, path);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"encoder_mode\": \"vocabulary\"") != std::string::npos);
  CHECK(text.find(e.provenance.vocabulary_checksum) != std::string::npos);
  CHECK(text.find("\"d\": 2") != std::string::npos);
}

TEST_CASE("lambda grid preset") {
  const auto grid = lambda_grid_preset();
  CHECK(std::vector<double>(grid.begin(), grid.end()) ==
        std::vector<double>{0.2, 0.5, 1, 2, 3, 4, 5, 10, 20, 30, 40, 50});
  CHECK(dataset_preset("adult").rho_grid.size() == 9);
}
