#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "faircal/dataset.hpp"

namespace faircal {

/// A discrete joint distribution over (cell, A, Y): A ~ Bernoulli(pr_group1),
/// cell | A ~ cell_weights[A] (uniform when empty), Y | cell, A ~ conditional.
struct SyntheticSpec {
  std::size_t cells = 0;
  std::size_t num_classes = 2;
  double pr_group1 = 0.5;
  /// conditional[cell][a][k] = Pr[Y = k | cell, A = a].
  std::vector<std::array<std::vector<double>, 2>> conditional;
  std::array<std::vector<double>, 2> cell_weights;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  /// Append two indicator columns for A after the cell one-hot block.
  bool group_feature = false;

  void validate() const;

  double cell_probability(std::size_t cell, int group) const;
  /// Population Pr[Y = k | A = a].
  double class_rate(std::size_t k, int group) const;
  /// True when every conditional is a point mass.
  bool deterministic() const;
};

struct SyntheticSample {
  EncodedDataset data;
  std::vector<std::size_t> cells;
  SyntheticSpec spec;
};

SyntheticSample generate_synthetic(const SyntheticSpec& spec);

/// Binary spec with prescribed Pr[A=1] and Pr[Y=1 | A=a]: cells are uniform
/// within each group and Pr[Y=1 | cell, a] is spread symmetrically around the
/// group rate, so the cells carry signal while the group averages are exact.
SyntheticSpec binary_spec_with_rates(double pr_group1, double pr_y1_group0,
                                     double pr_y1_group1, std::size_t cells,
                                     std::size_t samples, std::uint64_t seed);

}  // namespace faircal
