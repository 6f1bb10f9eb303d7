#include "faircal/mlp.hpp"

#include <cmath>
#include <string>

#include "faircal/errors.hpp"
#include "faircal/rng.hpp"

namespace faircal {

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor2* t : tensors()) total += t->size();
  return total;
}

std::array<Tensor2*, 6> ModelParams::tensors() {
  return {&layers[0].weight, &layers[0].bias, &layers[1].weight,
          &layers[1].bias,   &layers[2].weight, &layers[2].bias};
}

std::array<const Tensor2*, 6> ModelParams::tensors() const {
  return {&layers[0].weight, &layers[0].bias, &layers[1].weight,
          &layers[1].bias,   &layers[2].weight, &layers[2].bias};
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.layers[l].weight = Tensor2(layers[l].weight.rows(), layers[l].weight.cols());
    out.layers[l].bias = Tensor2(layers[l].bias.rows(), layers[l].bias.cols());
  }
  return out;
}

ModelParams init_mlp(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("init_mlp: input dimension must be at least 1");
  if (num_classes < 2) throw ConfigError("init_mlp: need at least 2 classes");
  const std::array<std::size_t, 4> widths = {input_dim, kHiddenWidths[0], kHiddenWidths[1],
                                             num_classes};
  Rng rng(seed);
  ModelParams params;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor2 w(fan_in, fan_out);
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    params.layers[l].weight = std::move(w);
    params.layers[l].bias = Tensor2(1, fan_out);
  }
  return params;
}

namespace {

void check_input(const ModelParams& params, std::size_t cols) {
  if (cols != params.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(cols) + " columns, model expects " +
                     std::to_string(params.input_dim()));
  }
}

void add_bias_relu(Tensor2& h, const Tensor2& bias, bool relu) {
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double v = row[c] + bias[c];
      row[c] = (relu && v < 0.0) ? 0.0 : v;
    }
  }
}

}  // namespace

Tensor2 forward(const ModelParams& params, const Tensor2& x) {
  check_input(params, x.cols());
  Tensor2 h = x;
  for (std::size_t l = 0; l < 3; ++l) {
    h = matmul(h, params.layers[l].weight);
    add_bias_relu(h, params.layers[l].bias, l < 2);
  }
  return h;
}

ParamVars attach(ad::Tape& tape, const ModelParams& params) {
  ParamVars vars;
  for (std::size_t l = 0; l < 3; ++l) {
    vars.weights[l] = tape.variable(params.layers[l].weight);
    vars.biases[l] = tape.variable(params.layers[l].bias);
  }
  return vars;
}

ad::Var forward(ad::Tape& tape, const ParamVars& params, ad::Var x) {
  if (!tape.owns(x)) throw Error("forward: input is not recorded on this tape");
  if (x.value().cols() != params.weights[0].value().rows()) {
    throw ShapeError("forward: input has " + std::to_string(x.value().cols()) +
                     " columns, model expects " +
                     std::to_string(params.weights[0].value().rows()));
  }
  ad::Var h = x;
  for (std::size_t l = 0; l < 3; ++l) {
    h = ad::add_bias(ad::matmul(h, params.weights[l]), params.biases[l]);
    if (l < 2) h = ad::relu(h);
  }
  return h;
}

Gradients grad(ad::Var loss, ad::Tape& tape, const ParamVars& params) {
  if (!tape.owns(loss)) throw Error("grad: loss is not recorded on this tape");
  tape.backward(loss);
  Gradients out;
  for (std::size_t l = 0; l < 3; ++l) {
    out.layers[l].weight = tape.gradient(params.weights[l]);
    out.layers[l].bias = tape.gradient(params.biases[l]);
  }
  return out;
}

Gradients finite_diff_grad(const std::function<double(const ModelParams&)>& loss_fn,
                           const ModelParams& params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step must be positive");
  ModelParams probe = params;
  Gradients out = params.zeros_like();
  auto probe_tensors = probe.tensors();
  auto out_tensors = out.tensors();
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    Tensor2& p = *probe_tensors[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss_fn(probe);
      p[i] = saved - h;
      const double down = loss_fn(probe);
      p[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_grad: non-finite loss");
      }
      (*out_tensors[t])[i] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

}  // namespace faircal
