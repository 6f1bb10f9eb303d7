#include "faircal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "faircal/adam.hpp"
#include "faircal/autodiff.hpp"
#include "faircal/csv.hpp"
#include "faircal/errors.hpp"
#include "faircal/rng.hpp"

namespace faircal {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double value_or_nan(const PeResult& r) { return r.value ? *r.value : kNaN; }

bool params_finite(const ModelParams& params) {
  for (const Tensor2* t : params.tensors()) {
    if (!all_finite(*t)) return false;
  }
  return true;
}

// Loss value of one optimizer step; the parameters are updated in place.
double train_step(ModelParams& params, AdamState& state, const LossSpec& spec,
                  const Tensor2& features, std::span<const int> labels,
                  std::span<const int> groups) {
  ad::Tape tape;
  const ParamVars vars = attach(tape, params);
  const ad::Var x = tape.constant(features);
  const ad::Var logits = forward(tape, vars, x);
  const ad::Var loss = total_loss(tape, spec, logits, labels, groups);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw NumericError("training loss is not finite");
  const Gradients g = grad(loss, tape, vars);
  adam_step(params, g, state);
  if (!params_finite(params)) throw NumericError("parameters became non-finite");
  return value;
}

struct Batch {
  Tensor2 features;
  std::vector<int> labels;
  std::vector<int> groups;
};

Batch gather(const EncodedDataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.features = Tensor2(rows.size(), data.input_dim());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto src = data.features.row(rows[j]);
    std::copy(src.begin(), src.end(), b.features.row(j).begin());
    b.labels.push_back(data.labels[rows[j]]);
    b.groups.push_back(data.groups[rows[j]]);
  }
  return b;
}

}  // namespace

void TrainingConfig::validate() const {
  loss.validate();
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (ece_bins < 1) throw ConfigError("ECE bin count must be at least 1");
  if (!(ts.learning_rate > 0.0)) throw ConfigError("temperature learning rate must be positive");
  if (ts.max_epochs < 0) throw ConfigError("temperature max_epochs must be non-negative");
}

std::string RunId::technique() const {
  std::string name(to_string(kind));
  if (groupwise) name += "_g";
  return name;
}

std::string RunId::str() const {
  std::string s = technique();
  if (rho) s += "_rho" + format_double(*rho);
  if (lambda) s += "_lam" + format_double(*lambda);
  s += "_s" + std::to_string(seed);
  return s;
}

RunId RunId::from(const TrainingConfig& config) {
  RunId id;
  id.kind = config.loss.kind;
  id.groupwise = config.loss.groupwise && config.loss.kind != LossKind::nll;
  if (id.groupwise) id.rho = config.loss.rho;
  if (takes_lambda(config.loss.kind)) id.lambda = config.loss.lambda;
  id.seed = config.seed;
  return id;
}

PreparedData prepare(const EncodedDataset& data, std::uint64_t split_seed) {
  const SplitAssignment split = split_6_1_1(data.size(), split_seed);
  PreparedData out;
  out.train = subset(data, split.train);
  out.validation = subset(data, split.validation);
  out.test = subset(data, split.test);
  out.train_rates = base_rates(out.train.labels, out.train.groups, data.num_classes);
  if (!out.train_rates.complete()) {
    throw DataError("training split contains only one sensitive group");
  }
  return out;
}

RunLog run_experiment(const PreparedData& data, const TrainingConfig& config,
                      ModelParams* final_params) {
  config.validate();
  const EncodedDataset& train = data.train;
  if (train.size() == 0) throw DataError("empty training split");
  if (data.test.size() == 0) throw DataError("empty test split");

  ModelParams params = init_mlp(train.input_dim(), train.num_classes, config.seed);
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  AdamState state = AdamState::init(params, adam);
  TsConfig ts = config.ts;
  ts.ece_bins = config.ece_bins;

  const bool minibatch = config.batch_size > 0 && config.batch_size < train.size();
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  RunLog log;
  log.id = RunId::from(config);
  log.rows.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    if (!minibatch) {
      row.loss = train_step(params, state, config.loss, train.features, train.labels,
                            train.groups);
    } else {
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      double total = 0.0;
      std::size_t steps = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        const Batch b = gather(train, std::span(order).subspan(start, stop - start));
        total += train_step(params, state, config.loss, b.features, b.labels, b.groups);
        ++steps;
      }
      row.loss = total / static_cast<double>(steps);
    }

    const Tensor2 test_logits = forward(params, data.test.features);
    if (!all_finite(test_logits)) throw NumericError("test logits are not finite");
    const PredictionSet preds =
        PredictionSet::from_logits(test_logits, data.test.labels, data.test.groups);
    const MetricsReport report = evaluate(preds, data.train_rates, config.ece_bins);
    row.acc = report.accuracy;
    row.ece = report.ece;
    row.pe_stoch = report.pe_stochastic ? *report.pe_stochastic : kNaN;
    row.pe_det = report.pe_deterministic ? *report.pe_deterministic : kNaN;

    if (config.temperature_scaling && data.validation.size() > 0) {
      const Tensor2 val_logits = forward(params, data.validation.features);
      const DualTsFit fit = fit_dual_temperature(val_logits, data.validation.labels,
                                                 data.validation.groups, ts);
      const PredictionSet scaled = apply_dual_temperature(test_logits, data.test.labels,
                                                          data.test.groups, fit.temperatures);
      row.ece_ts = ece(scaled, config.ece_bins);
      row.pe_stoch_ts = value_or_nan(pe(scaled, data.train_rates, PeMode::stochastic));
      row.t0 = fit.temperatures.t0;
      row.t1 = fit.temperatures.t1;
      row.val_ece = fit.trace.val_ece.front();
      row.val_ece_ts = fit.trace.val_ece[fit.trace.chosen_epoch];
    } else {
      row.ece_ts = row.ece;
      row.pe_stoch_ts = row.pe_stoch;
      if (data.validation.size() > 0) {
        const Tensor2 val_logits = forward(params, data.validation.features);
        row.val_ece = ece(PredictionSet::from_logits(val_logits, data.validation.labels,
                                                     data.validation.groups),
                          config.ece_bins);
      }
      row.val_ece_ts = row.val_ece;
    }
    log.rows.push_back(row);
  }
  if (final_params != nullptr) *final_params = std::move(params);
  return log;
}

void SweepConfig::validate() const {
  if (losses.empty()) throw ConfigError("sweep: no losses given");
  if (seeds.empty()) throw ConfigError("sweep: no seeds given");
  for (const auto& cell : expand_grid(*this)) cell.validate();
}

std::vector<TrainingConfig> expand_grid(const SweepConfig& config) {
  std::vector<TrainingConfig> cells;
  for (const LossSpec& loss : config.losses) {
    const bool grouped = loss.groupwise && loss.kind != LossKind::nll;
    std::vector<double> rhos = grouped ? config.rho_grid : std::vector<double>{};
    if (rhos.empty()) rhos.push_back(loss.rho);
    std::vector<std::optional<double>> lambdas;
    if (takes_lambda(loss.kind)) {
      for (double l : config.lambda_grid) lambdas.emplace_back(l);
      if (lambdas.empty()) lambdas.push_back(loss.lambda);
    } else {
      lambdas.emplace_back(std::nullopt);
    }
    for (double rho : rhos) {
      for (const auto& lambda : lambdas) {
        for (std::uint64_t seed : config.seeds) {
          TrainingConfig cell = config.base;
          cell.loss = loss;
          cell.loss.rho = rho;
          cell.loss.lambda = lambda;
          cell.seed = seed;
          cells.push_back(cell);
        }
      }
    }
  }
  return cells;
}

SweepResult sweep(const PreparedData& data, const SweepConfig& config,
                  const SweepProgress& progress) {
  config.validate();
  const std::vector<TrainingConfig> cells = expand_grid(config);
  std::vector<std::optional<RunLog>> logs(cells.size());
  std::vector<std::optional<std::string>> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      bool ok = true;
      try {
        logs[i] = run_experiment(data, cells[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        ok = false;
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(RunId::from(cells[i]), ok);
      }
    }
  };

  unsigned jobs = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                   : config.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, cells.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (logs[i]) {
      result.logs.push_back(std::move(*logs[i]));
    } else {
      result.failures.push_back({RunId::from(cells[i]), errors[i].value_or("unknown failure")});
    }
  }
  return result;
}

}  // namespace faircal
