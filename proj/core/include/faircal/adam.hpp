#pragma once

#include <cstdint>
#include <span>

#include "faircal/mlp.hpp"

namespace faircal {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  ModelParams first_moment;
  ModelParams second_moment;
  std::int64_t step = 0;

  static AdamState init(const ModelParams& params, AdamConfig config = {});
};

/// One bias-corrected Adam update in place; increments state.step.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

/// Flat-buffer form used for small parameter vectors (e.g. temperatures).
/// `step` is the 1-based index of this update.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamConfig& config);

}  // namespace faircal
