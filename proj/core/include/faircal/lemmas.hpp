#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "faircal/metrics.hpp"
#include "faircal/synthetic.hpp"

namespace faircal {

/// A statistic that should vanish, with its Monte-Carlo standard error.
struct ZeroCheck {
  double value = 0.0;
  double sigma = 0.0;
  bool pass = false;
};

struct LemmaOptions {
  /// Oracle probabilities are sharpened as q_k ∝ p_k^(1/T); T = 1 is the oracle.
  double temperature = 1.0;
  double sigmas = 3.0;
  std::size_t bins = kDefaultBins;
  /// Sampling seed; SyntheticSpec::seed is used when empty.
  std::optional<std::uint64_t> seed;
};

/// Oracle-predictor check on a synthetic distribution. Base rates are taken
/// from the sample itself.
///   ECE sigma: sum over bins of sqrt(sum conf (1 - conf)) / n.
///   PE sigma: max over k of sqrt(s1^2 + s0^2), s_a = sqrt(sum_{i in a} q_ik (1 - q_ik)) / (n_a r_ak).
struct LemmaReport {
  std::size_t samples = 0;
  double temperature = 1.0;
  double sigmas = 3.0;
  ZeroCheck pooled_ece;
  std::array<ZeroCheck, 2> group_ece;
  ZeroCheck pe_stochastic;
  /// Reported only; argmax rates need not match base rates.
  std::optional<double> pe_deterministic;
  double accuracy = 0.0;

  bool pass() const;
};

/// Throws ConfigError when n_samples < 10^4 and DataError when the sample
/// misses a group.
LemmaReport verify_lemmas(const SyntheticSpec& spec, std::size_t n_samples,
                          const LemmaOptions& options = {});

inline constexpr std::size_t kMinLemmaSamples = 10000;

/// Exact-probability oracle outputs (optionally sharpened) for a sample.
Tensor2 oracle_probabilities(const SyntheticSample& sample, double temperature = 1.0);

}  // namespace faircal
