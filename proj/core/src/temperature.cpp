#include "faircal/temperature.hpp"

#include <cmath>
#include <string>

#include "faircal/adam.hpp"
#include "faircal/errors.hpp"

namespace faircal {

namespace {

// Mean cross-entropy of softmax(z_i / T_{g_i}) and its gradient with respect
// to u_g = log T_g. Rows of group g contribute -(sum_k p_k z_k - z_y) / T_g.
struct Objective {
  double loss = 0.0;
  std::array<double, 2> grad{};
};

Objective cross_entropy(const Tensor2& logits, std::span<const int> labels,
                        std::span<const int> groups, const std::array<double, 2>& temps) {
  Objective out;
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  std::vector<double> s(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(groups[i]);
    const double t = temps[g];
    auto z = logits.row(i);
    double peak = -INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      s[c] = z[c] / t;
      peak = std::max(peak, s[c]);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += std::exp(s[c] - peak);
    const double log_norm = peak + std::log(total);
    const auto y = static_cast<std::size_t>(labels[i]);
    out.loss += log_norm - s[y];
    double expected_z = 0.0;
    for (std::size_t c = 0; c < k; ++c) expected_z += std::exp(s[c] - log_norm) * z[c];
    out.grad[g] += -(expected_z - z[y]) / t;
  }
  out.loss /= static_cast<double>(n);
  out.grad[0] /= static_cast<double>(n);
  out.grad[1] /= static_cast<double>(n);
  return out;
}

double scaled_ece(const Tensor2& logits, std::span<const int> labels, std::span<const int> groups,
                  const TemperaturePair& pair, std::size_t bins) {
  return ece(apply_dual_temperature(logits, labels, groups, pair), bins);
}

void check_validation(const Tensor2& logits, std::span<const int> labels,
                      std::span<const int> groups, const TsConfig& config) {
  if (logits.rows() == 0) throw DataError("temperature fit: empty validation set");
  if (labels.size() != logits.rows() || groups.size() != logits.rows()) {
    throw ShapeError("temperature fit: logits, labels and groups differ in length");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (groups[i] != 0 && groups[i] != 1) throw DataError("temperature fit: groups must be 0/1");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols()) {
      throw DataError("temperature fit: label out of range");
    }
  }
  if (!(config.learning_rate > 0.0)) throw ConfigError("temperature fit: learning rate must be > 0");
  if (config.max_epochs < 0) throw ConfigError("temperature fit: max_epochs must be >= 0");
  if (config.patience < 1) throw ConfigError("temperature fit: patience must be >= 1");
}

// Shared optimization loop over log-temperatures for `groups` (all zero for
// the single-temperature case).
TsFitTrace run_fit(const Tensor2& logits, std::span<const int> labels, std::span<const int> groups,
                   const TsConfig& config, std::array<double, 2>& log_temps) {
  AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
  std::array<double, 2> m{};
  std::array<double, 2> v{};
  TsFitTrace trace;
  double best = INFINITY;
  int rises = 0;
  for (int epoch = 0;; ++epoch) {
    const std::array<double, 2> temps = {std::exp(log_temps[0]), std::exp(log_temps[1])};
    const TemperaturePair pair{temps[0], temps[1]};
    const Objective obj = cross_entropy(logits, labels, groups, temps);
    const double val_ece = scaled_ece(logits, labels, groups, pair, config.ece_bins);
    if (!std::isfinite(obj.loss)) throw NumericError("temperature fit: non-finite loss");
    trace.val_loss.push_back(obj.loss);
    trace.val_ece.push_back(val_ece);
    trace.temperatures.push_back(pair);
    if (val_ece < best) {
      best = val_ece;
      trace.chosen_epoch = static_cast<std::size_t>(epoch);
    }
    if (epoch > 0) {
      rises = val_ece > trace.val_ece[trace.val_ece.size() - 2] ? rises + 1 : 0;
      if (rises >= config.patience) {
        trace.stop_reason = TsStopReason::ece_increase;
        break;
      }
    }
    if (epoch == config.max_epochs) {
      trace.stop_reason = TsStopReason::max_epochs;
      break;
    }
    adam_update(log_temps, obj.grad, m, v, epoch + 1, adam);
  }
  return trace;
}

}  // namespace

void TemperaturePair::validate() const {
  if (!(t0 > 0.0) || !(t1 > 0.0) || !std::isfinite(t0) || !std::isfinite(t1)) {
    throw ConfigError("temperatures must be positive and finite");
  }
}

std::string_view to_string(TsStopReason reason) {
  return reason == TsStopReason::ece_increase ? "ece_increase" : "max_epochs";
}

Tensor2 scale_logits(const Tensor2& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("scale_logits: temperature must be positive and finite");
  }
  Tensor2 out = logits;
  for (double& v : out.values()) v /= temperature;
  return out;
}

DualTsFit fit_dual_temperature(const Tensor2& val_logits, std::span<const int> val_labels,
                               std::span<const int> val_groups, const TsConfig& config) {
  check_validation(val_logits, val_labels, val_groups, config);
  DualTsFit fit;
  fit.group_missing = {true, true};
  for (int a : val_groups) fit.group_missing[static_cast<std::size_t>(a)] = false;
  std::array<double, 2> log_temps{};
  fit.trace = run_fit(val_logits, val_labels, val_groups, config, log_temps);
  fit.temperatures = fit.trace.temperatures[fit.trace.chosen_epoch];
  // A group without validation rows never receives a gradient; pin it anyway.
  if (fit.group_missing[0]) fit.temperatures.t0 = 1.0;
  if (fit.group_missing[1]) fit.temperatures.t1 = 1.0;
  return fit;
}

SingleTsFit fit_temperature(const Tensor2& val_logits, std::span<const int> val_labels,
                            const TsConfig& config) {
  const std::vector<int> shared(val_labels.size(), 0);
  check_validation(val_logits, val_labels, shared, config);
  std::array<double, 2> log_temps{};
  SingleTsFit fit;
  fit.trace = run_fit(val_logits, val_labels, shared, config, log_temps);
  fit.temperature = fit.trace.temperatures[fit.trace.chosen_epoch].t0;
  return fit;
}

PredictionSet apply_dual_temperature(const Tensor2& logits, std::span<const int> labels,
                                     std::span<const int> groups, const TemperaturePair& pair) {
  pair.validate();
  if (groups.size() != logits.rows() || labels.size() != logits.rows()) {
    throw ShapeError("apply_dual_temperature: logits, labels and groups differ in length");
  }
  Tensor2 scaled = logits;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    if (groups[i] != 0 && groups[i] != 1) {
      throw DataError("apply_dual_temperature: group value " + std::to_string(groups[i]) +
                      " is not 0 or 1");
    }
    const double t = pair.for_group(groups[i]);
    for (double& v : scaled.row(i)) v /= t;
  }
  PredictionSet out = PredictionSet::from_logits(
      scaled, std::vector<int>(labels.begin(), labels.end()),
      std::vector<int>(groups.begin(), groups.end()));
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out.predicted[i] = static_cast<int>(argmax(logits.row(i)));
  }
  return out;
}

}  // namespace faircal
