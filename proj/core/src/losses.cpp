#include "faircal/losses.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>

#include "faircal/errors.hpp"

namespace faircal {

namespace {

constexpr std::array<std::pair<LossKind, std::string_view>, 8> kLossNames = {{
    {LossKind::nll, "nll"},
    {LossKind::label_smoothing, "ls"},
    {LossKind::focal, "fl"},
    {LossKind::focal_sd, "flsd"},
    {LossKind::dca, "dca"},
    {LossKind::mdca, "mdca"},
    {LossKind::mmce, "mmce"},
    {LossKind::mmce_w, "mmce_w"},
}};

void require_rows(const char* name, ad::Var logits, std::span<const int> labels) {
  const std::size_t n = logits.value().rows();
  if (n == 0) throw DataError(std::string(name) + ": empty batch");
  if (labels.size() != n) throw ShapeError(std::string(name) + ": one label per row required");
  const auto k = static_cast<int>(logits.value().cols());
  for (int y : labels) {
    if (y < 0 || y >= k) throw DataError(std::string(name) + ": label out of range");
  }
}

// Correctness indicator c_i = 1{y_i = argmax_k p_k}, ties toward the lowest index.
std::vector<int> correctness(const Tensor2& logits, std::span<const int> labels) {
  std::vector<int> c(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c[i] = static_cast<int>(argmax(logits.row(i))) == labels[i] ? 1 : 0;
  }
  return c;
}

struct Split {
  std::array<std::vector<std::size_t>, 2> rows;
};

Split split_groups(std::span<const int> groups, std::size_t n) {
  if (groups.size() != n) throw ShapeError("group-wise loss: one group flag per row required");
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    if (groups[i] != 0 && groups[i] != 1) throw DataError("group-wise loss: groups must be 0/1");
    s.rows[static_cast<std::size_t>(groups[i])].push_back(i);
  }
  if (s.rows[0].empty() && s.rows[1].empty()) throw DataError("group-wise loss: empty batch");
  return s;
}

std::vector<int> take(std::span<const int> values, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

// Per-sample weights v and confidences r such that the squared kernel loss over
// blocks B, B' is (1 / |B||B'|) sum_{i in B, j in B'} v_i v_j k(r_i, r_j).
//   MMCE:   v_i = c_i - r_i
//   MMCE-W: v_i = (m / m1)(1 - r_i) if correct, -(m / m0) r_i if wrong
// With B = B' = the whole batch this is exactly the textbook quadratic form.
struct KernelTerms {
  ad::Var weight;
  ad::Var confidence;
};

KernelTerms kernel_terms(ad::Tape& tape, LossKind kind, ad::Var logits,
                         std::span<const int> labels) {
  const std::size_t n = labels.size();
  const std::vector<int> c = correctness(logits.value(), labels);
  ad::Var r = ad::row_max(ad::softmax_rows(logits));
  Tensor2 coef(n, 1);
  Tensor2 offset(n, 1);
  if (kind == LossKind::mmce) {
    for (std::size_t i = 0; i < n; ++i) {
      coef[i] = -1.0;
      offset[i] = c[i];
    }
  } else {
    const auto m1 = static_cast<double>(std::count(c.begin(), c.end(), 1));
    const double m0 = static_cast<double>(n) - m1;
    const auto m = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (c[i] == 1) {
        coef[i] = -m / m1;
        offset[i] = m / m1;
      } else {
        coef[i] = -m / m0;
        offset[i] = 0.0;
      }
    }
  }
  ad::Var v = ad::add(ad::mul(tape.constant(std::move(coef)), r), tape.constant(std::move(offset)));
  return {v, r};
}

ad::Var root_of_form(ad::Var quadratic) { return ad::sqrt(ad::clamp_min(quadratic, 0.0)); }

}  // namespace

std::string_view to_string(LossKind kind) {
  for (const auto& [k, name] : kLossNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  std::replace(lower.begin(), lower.end(), '-', '_');
  for (const auto& [k, n] : kLossNames) {
    if (n == lower) return k;
  }
  if (lower == "label_smoothing") return LossKind::label_smoothing;
  if (lower == "focal") return LossKind::focal;
  if (lower == "focal_sd") return LossKind::focal_sd;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

bool is_pairwise(LossKind kind) { return kind == LossKind::mmce || kind == LossKind::mmce_w; }

bool takes_lambda(LossKind kind) {
  return kind == LossKind::dca || kind == LossKind::mdca || is_pairwise(kind);
}

void LossSpec::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("loss: alpha must lie in [0, 1)");
  if (!(focal_gamma >= 0.0)) throw ConfigError("loss: focal gamma must be non-negative");
  if (!(kernel_gamma > 0.0)) throw ConfigError("loss: kernel gamma must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("loss: rho must lie in [0, 1]");
  if (lambda) {
    if (!takes_lambda(kind)) {
      throw ConfigError("loss: lambda is not used by " + std::string(to_string(kind)));
    }
    if (!(*lambda >= 0.0) || !std::isfinite(*lambda)) {
      throw ConfigError("loss: lambda must be a finite non-negative number");
    }
  } else if (takes_lambda(kind)) {
    throw ConfigError("loss: " + std::string(to_string(kind)) + " requires lambda");
  }
}

void GroupBatch::validate() const {
  if (features.rows() != labels.size() || groups.size() != labels.size()) {
    throw ShapeError("GroupBatch: features, labels and groups must have the same length");
  }
  for (int a : groups) {
    if (a != 0 && a != 1) throw DataError("GroupBatch: group flags must be 0 or 1");
  }
}

namespace losses {

ad::Var nll(ad::Tape&, ad::Var logits, std::span<const int> labels) {
  require_rows("nll", logits, labels);
  return -ad::mean(ad::pick(ad::log_softmax_rows(logits), labels));
}

ad::Var label_smoothing(ad::Tape& tape, ad::Var logits, std::span<const int> labels,
                        double alpha) {
  require_rows("label_smoothing", logits, labels);
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("label_smoothing: alpha in [0, 1)");
  const std::size_t n = labels.size();
  const std::size_t k = logits.value().cols();
  const double off = k > 1 ? alpha / static_cast<double>(k - 1) : 0.0;
  Tensor2 target(n, k, off);
  for (std::size_t i = 0; i < n; ++i) target(i, static_cast<std::size_t>(labels[i])) = 1.0 - alpha;
  ad::Var weighted = ad::mul(ad::log_softmax_rows(logits), tape.constant(std::move(target)));
  return ad::scale(ad::sum(weighted), -1.0 / static_cast<double>(n));
}

ad::Var focal(ad::Tape&, ad::Var logits, std::span<const int> labels, double gamma) {
  require_rows("focal", logits, labels);
  if (!(gamma >= 0.0)) throw ConfigError("focal: gamma must be non-negative");
  ad::Var log_py = ad::pick(ad::log_softmax_rows(logits), labels);
  ad::Var modulator = ad::pow(1.0 - ad::exp(log_py), gamma);
  return -ad::mean(ad::mul(modulator, log_py));
}

ad::Var focal_sd(ad::Tape&, ad::Var logits, std::span<const int> labels) {
  require_rows("focal_sd", logits, labels);
  ad::Var log_py = ad::pick(ad::log_softmax_rows(logits), labels);
  ad::Var py = ad::exp(log_py);
  Tensor2 gammas(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) gammas[i] = py.value()[i] <= 0.2 ? 5.0 : 3.0;
  ad::Var modulator = ad::pow(1.0 - py, gammas);
  return -ad::mean(ad::mul(modulator, log_py));
}

ad::Var dca(ad::Tape& tape, ad::Var logits, std::span<const int> labels) {
  require_rows("dca", logits, labels);
  const std::vector<int> c = correctness(logits.value(), labels);
  double accuracy = 0.0;
  for (int v : c) accuracy += v;
  accuracy /= static_cast<double>(c.size());
  ad::Var confidence = ad::mean(ad::row_max(ad::softmax_rows(logits)));
  return ad::abs(ad::sub(tape.constant(Tensor2::scalar(accuracy)), confidence));
}

ad::Var mdca(ad::Tape& tape, ad::Var logits, std::span<const int> labels) {
  require_rows("mdca", logits, labels);
  const std::size_t k = logits.value().cols();
  Tensor2 freq(1, k);
  for (int y : labels) freq[static_cast<std::size_t>(y)] += 1.0;
  for (double& f : freq.values()) f /= static_cast<double>(labels.size());
  ad::Var gap = ad::sub(ad::col_mean(ad::softmax_rows(logits)), tape.constant(std::move(freq)));
  return ad::mean(ad::abs(gap));
}

double laplacian_kernel(double r1, double r2, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("laplacian_kernel: gamma must be positive");
  return std::exp(-std::abs(r1 - r2) / (2.0 * gamma));
}

ad::Var mmce(ad::Tape& tape, ad::Var logits, std::span<const int> labels, double gamma) {
  require_rows("mmce", logits, labels);
  KernelTerms t = kernel_terms(tape, LossKind::mmce, logits, labels);
  return root_of_form(ad::laplacian_pair_mean(t.weight, t.confidence, t.weight, t.confidence, gamma));
}

ad::Var mmce_w(ad::Tape& tape, ad::Var logits, std::span<const int> labels, double gamma) {
  require_rows("mmce_w", logits, labels);
  KernelTerms t = kernel_terms(tape, LossKind::mmce_w, logits, labels);
  return root_of_form(ad::laplacian_pair_mean(t.weight, t.confidence, t.weight, t.confidence, gamma));
}

ad::Var groupwise_linear(ad::Tape& tape, const LinearLoss& loss, ad::Var logits,
                         std::span<const int> labels, std::span<const int> groups, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("groupwise_linear: rho must lie in [0, 1]");
  if (labels.size() != logits.value().rows()) {
    throw ShapeError("groupwise_linear: one label per row required");
  }
  const Split split = split_groups(groups, labels.size());
  const std::array<double, 2> weight = {1.0 - rho, rho};
  ad::Var total;
  for (std::size_t a = 0; a < 2; ++a) {
    if (split.rows[a].empty()) continue;
    const std::vector<int> sub_labels = take(labels, split.rows[a]);
    ad::Var term = ad::scale(loss(tape, ad::gather_rows(logits, split.rows[a]), sub_labels), weight[a]);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

ad::Var groupwise_pairwise(ad::Tape& tape, LossKind kind, ad::Var logits,
                           std::span<const int> labels, std::span<const int> groups, double rho,
                           double gamma) {
  if (!is_pairwise(kind)) throw ConfigError("groupwise_pairwise: kind must be mmce or mmce_w");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("groupwise_pairwise: rho must lie in [0, 1]");
  require_rows("groupwise_pairwise", logits, labels);
  const Split split = split_groups(groups, labels.size());
  // Weights and confidences come from the whole batch so that MMCE-W's
  // correct/wrong normalization is shared by every block.
  KernelTerms t = kernel_terms(tape, kind, logits, labels);
  std::array<ad::Var, 2> v;
  std::array<ad::Var, 2> r;
  for (std::size_t a = 0; a < 2; ++a) {
    if (split.rows[a].empty()) continue;
    v[a] = ad::gather_rows(t.weight, split.rows[a]);
    r[a] = ad::gather_rows(t.confidence, split.rows[a]);
  }
  const std::array<double, 2> weight = {1.0 - rho, rho};
  ad::Var form;
  auto accumulate = [&](ad::Var term) { form = form.valid() ? ad::add(form, term) : term; };
  for (std::size_t a = 0; a < 2; ++a) {
    if (!v[a].valid()) continue;
    accumulate(ad::scale(ad::laplacian_pair_mean(v[a], r[a], v[a], r[a], gamma),
                         weight[a] * weight[a]));
  }
  if (v[0].valid() && v[1].valid()) {
    accumulate(ad::scale(ad::laplacian_pair_mean(v[0], r[0], v[1], r[1], gamma),
                         2.0 * rho * (1.0 - rho)));
  }
  return root_of_form(form);
}

LinearLoss linear_loss(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::nll:
      return [](ad::Tape& t, ad::Var z, std::span<const int> y) { return nll(t, z, y); };
    case LossKind::label_smoothing:
      return [alpha = spec.alpha](ad::Tape& t, ad::Var z, std::span<const int> y) {
        return label_smoothing(t, z, y, alpha);
      };
    case LossKind::focal:
      return [gamma = spec.focal_gamma](ad::Tape& t, ad::Var z, std::span<const int> y) {
        return focal(t, z, y, gamma);
      };
    case LossKind::focal_sd:
      return [](ad::Tape& t, ad::Var z, std::span<const int> y) { return focal_sd(t, z, y); };
    case LossKind::dca:
      return [](ad::Tape& t, ad::Var z, std::span<const int> y) { return dca(t, z, y); };
    case LossKind::mdca:
      return [](ad::Tape& t, ad::Var z, std::span<const int> y) { return mdca(t, z, y); };
    case LossKind::mmce:
    case LossKind::mmce_w:
      break;
  }
  throw ConfigError("linear_loss: " + std::string(to_string(spec.kind)) + " is pair-wise");
}

}  // namespace losses

ad::Var total_loss(ad::Tape& tape, const LossSpec& spec, ad::Var logits,
                   std::span<const int> labels, std::span<const int> groups) {
  spec.validate();
  using namespace losses;
  switch (spec.kind) {
    case LossKind::nll:
      return nll(tape, logits, labels);
    case LossKind::label_smoothing:
    case LossKind::focal:
    case LossKind::focal_sd: {
      const LinearLoss base = linear_loss(spec);
      return spec.groupwise ? groupwise_linear(tape, base, logits, labels, groups, spec.rho)
                            : base(tape, logits, labels);
    }
    case LossKind::dca:
    case LossKind::mdca: {
      const LinearLoss base = linear_loss(spec);
      ad::Var term = spec.groupwise
                         ? groupwise_linear(tape, base, logits, labels, groups, spec.rho)
                         : base(tape, logits, labels);
      return ad::add(nll(tape, logits, labels), ad::scale(term, *spec.lambda));
    }
    case LossKind::mmce:
    case LossKind::mmce_w: {
      ad::Var term =
          spec.groupwise
              ? groupwise_pairwise(tape, spec.kind, logits, labels, groups, spec.rho,
                                   spec.kernel_gamma)
              : (spec.kind == LossKind::mmce ? mmce(tape, logits, labels, spec.kernel_gamma)
                                             : mmce_w(tape, logits, labels, spec.kernel_gamma));
      return ad::add(nll(tape, logits, labels), ad::scale(term, *spec.lambda));
    }
  }
  throw ConfigError("total_loss: unhandled loss kind");
}

double total_loss(const LossSpec& spec, const Tensor2& logits, std::span<const int> labels,
                  std::span<const int> groups) {
  ad::Tape tape;
  ad::Var z = tape.constant(logits);
  return total_loss(tape, spec, z, labels, groups).value()[0];
}

}  // namespace faircal
