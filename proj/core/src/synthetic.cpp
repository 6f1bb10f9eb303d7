#include "faircal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faircal/errors.hpp"
#include "faircal/rng.hpp"

namespace faircal {

void SyntheticSpec::validate() const {
  if (cells == 0) throw ConfigError("synthetic spec: needs at least one cell");
  if (num_classes < 2) throw ConfigError("synthetic spec: needs at least two classes");
  if (!(pr_group1 >= 0.0 && pr_group1 <= 1.0)) {
    throw ConfigError("synthetic spec: Pr[A=1] must lie in [0, 1]");
  }
  if (conditional.size() != cells) {
    throw ConfigError("synthetic spec: one conditional entry per cell required");
  }
  for (std::size_t c = 0; c < cells; ++c) {
    for (const auto& dist : conditional[c]) {
      if (dist.size() != num_classes) throw ConfigError("synthetic spec: conditional width != K");
      double total = 0.0;
      for (double p : dist) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic spec: probability outside [0,1]");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("synthetic spec: conditional of cell " + std::to_string(c) +
                          " does not sum to 1");
      }
    }
  }
  for (const auto& w : cell_weights) {
    if (w.empty()) continue;
    if (w.size() != cells) throw ConfigError("synthetic spec: cell weights need one entry per cell");
    double total = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw ConfigError("synthetic spec: negative cell weight");
      total += v;
    }
    if (!(total > 0.0)) throw ConfigError("synthetic spec: cell weights sum to zero");
  }
}

double SyntheticSpec::cell_probability(std::size_t cell, int group) const {
  const auto& w = cell_weights[static_cast<std::size_t>(group)];
  if (w.empty()) return 1.0 / static_cast<double>(cells);
  double total = 0.0;
  for (double v : w) total += v;
  return w[cell] / total;
}

double SyntheticSpec::class_rate(std::size_t k, int group) const {
  double rate = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    rate += cell_probability(c, group) * conditional[c][static_cast<std::size_t>(group)][k];
  }
  return rate;
}

bool SyntheticSpec::deterministic() const {
  for (const auto& entry : conditional) {
    for (const auto& dist : entry) {
      for (double p : dist) {
        if (p != 0.0 && p != 1.0) return false;
      }
    }
  }
  return true;
}

SyntheticSample generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.samples;
  const std::size_t d = spec.cells + (spec.group_feature ? 2 : 0);
  SyntheticSample out;
  out.spec = spec;
  out.data.features = Tensor2(n, d);
  out.data.labels.resize(n);
  out.data.groups.resize(n);
  out.data.num_classes = spec.num_classes;
  out.cells.resize(n);
  std::array<std::vector<double>, 2> weights;
  for (int a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < spec.cells; ++c) {
      weights[static_cast<std::size_t>(a)].push_back(spec.cell_probability(c, a));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int a = rng.bernoulli(spec.pr_group1) ? 1 : 0;
    const std::size_t cell = rng.categorical(weights[static_cast<std::size_t>(a)]);
    const std::size_t y = rng.categorical(spec.conditional[cell][static_cast<std::size_t>(a)]);
    out.data.groups[i] = a;
    out.data.labels[i] = static_cast<int>(y);
    out.cells[i] = cell;
    out.data.features(i, cell) = 1.0;
    if (spec.group_feature) out.data.features(i, spec.cells + static_cast<std::size_t>(a)) = 1.0;
  }
  out.data.provenance.source = "synthetic";
  out.data.provenance.encoder_mode = "one-hot cells";
  out.data.provenance.seed = spec.seed;
  out.data.provenance.group_feature = spec.group_feature;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    out.data.provenance.label_values.push_back(std::to_string(k));
  }
  return out;
}

SyntheticSpec binary_spec_with_rates(double pr_group1, double pr_y1_group0, double pr_y1_group1,
                                     std::size_t cells, std::size_t samples, std::uint64_t seed) {
  if (cells == 0) throw ConfigError("binary_spec_with_rates: needs at least one cell");
  SyntheticSpec spec;
  spec.cells = cells;
  spec.num_classes = 2;
  spec.pr_group1 = pr_group1;
  spec.samples = samples;
  spec.seed = seed;
  const std::array<double, 2> base = {pr_y1_group0, pr_y1_group1};
  for (double b : base) {
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("binary_spec_with_rates: rate outside [0,1]");
  }
  spec.conditional.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    // Offsets -1..1 are symmetric around zero, so uniform cells average to the base rate.
    const double offset =
        cells == 1 ? 0.0 : 2.0 * static_cast<double>(c) / static_cast<double>(cells - 1) - 1.0;
    for (std::size_t a = 0; a < 2; ++a) {
      const double spread = 0.9 * std::min(base[a], 1.0 - base[a]);
      const double p1 = base[a] + spread * offset;
      spec.conditional[c][a] = {1.0 - p1, p1};
    }
  }
  spec.validate();
  return spec;
}

}  // namespace faircal
