#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>

#include "faircal/autodiff.hpp"
#include "faircal/tensor.hpp"

namespace faircal {

inline constexpr std::array<std::size_t, 2> kHiddenWidths = {128, 64};

/// Affine layer: y = x * weight + bias, weight is fan_in x fan_out, bias 1 x fan_out.
struct DenseLayer {
  Tensor2 weight;
  Tensor2 bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Weights of the d -> 128 -> 64 -> K perceptron. Gradients share this type.
struct ModelParams {
  std::array<DenseLayer, 3> layers;

  std::size_t input_dim() const { return layers[0].weight.rows(); }
  std::size_t num_classes() const { return layers[2].weight.cols(); }
  std::size_t parameter_count() const;

  /// Weight, bias, weight, bias, ... in layer order.
  std::array<Tensor2*, 6> tensors();
  std::array<const Tensor2*, 6> tensors() const;

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

/// Glorot-uniform weights, zero biases; identical seeds give identical bytes.
ModelParams init_mlp(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed);

/// Plain evaluation, no tape.
Tensor2 forward(const ModelParams& params, const Tensor2& x);

/// Parameters registered on a tape as differentiable leaves.
struct ParamVars {
  std::array<ad::Var, 3> weights;
  std::array<ad::Var, 3> biases;
};

ParamVars attach(ad::Tape& tape, const ModelParams& params);
ad::Var forward(ad::Tape& tape, const ParamVars& params, ad::Var x);

/// Runs the reverse sweep from `loss` and collects parameter adjoints.
Gradients grad(ad::Var loss, ad::Tape& tape, const ParamVars& params);

/// Central differences, one parameter at a time. Intended as a test oracle.
Gradients finite_diff_grad(const std::function<double(const ModelParams&)>& loss_fn,
                           const ModelParams& params, double h);

}  // namespace faircal
