#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faircal/autodiff.hpp"
#include "faircal/tensor.hpp"

namespace faircal {

enum class LossKind { nll, label_smoothing, focal, focal_sd, dca, mdca, mmce, mmce_w };

std::string_view to_string(LossKind kind);
/// Accepts the names printed by to_string (e.g. "mmce_w"), case-insensitive.
LossKind parse_loss_kind(std::string_view name);

/// Kernel (pair-wise) losses: MMCE and MMCE-W.
bool is_pairwise(LossKind kind);
/// Losses added to NLL with a weight lambda: DCA, MDCA, MMCE, MMCE-W.
bool takes_lambda(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::nll;
  double alpha = 0.05;         // label smoothing
  double focal_gamma = 3.0;    // focal loss exponent
  double kernel_gamma = 0.2;   // Laplacian bandwidth for MMCE / MMCE-W
  std::optional<double> lambda;
  double rho = 0.5;
  bool groupwise = false;

  /// Throws ConfigError on out-of-range values or a lambda given to (or missing
  /// from) a kind that does (not) use it.
  void validate() const;
};

/// One training batch split by the binary sensitive attribute.
struct GroupBatch {
  Tensor2 features;
  std::vector<int> labels;
  std::vector<int> groups;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

namespace losses {

using LinearLoss =
    std::function<ad::Var(ad::Tape&, ad::Var logits, std::span<const int> labels)>;

// Per-sample losses averaged over the batch. All take logits (n x K).
ad::Var nll(ad::Tape& tape, ad::Var logits, std::span<const int> labels);
ad::Var label_smoothing(ad::Tape& tape, ad::Var logits, std::span<const int> labels,
                        double alpha = 0.05);
ad::Var focal(ad::Tape& tape, ad::Var logits, std::span<const int> labels, double gamma = 3.0);
/// gamma = 5 where p_y <= 0.2, else 3.
ad::Var focal_sd(ad::Tape& tape, ad::Var logits, std::span<const int> labels);

// Batch-statistic losses; correctness and label indicators are constants.
ad::Var dca(ad::Tape& tape, ad::Var logits, std::span<const int> labels);
ad::Var mdca(ad::Tape& tape, ad::Var logits, std::span<const int> labels);

double laplacian_kernel(double r1, double r2, double gamma = 0.2);

/// Square root of the (clamped) kernel quadratic form.
ad::Var mmce(ad::Tape& tape, ad::Var logits, std::span<const int> labels, double gamma = 0.2);
ad::Var mmce_w(ad::Tape& tape, ad::Var logits, std::span<const int> labels,
               double gamma = 0.2);

/// (1 - rho) L(B0) + rho L(B1). An empty sub-batch contributes 0.
ad::Var groupwise_linear(ad::Tape& tape, const LinearLoss& loss, ad::Var logits,
                         std::span<const int> labels, std::span<const int> groups, double rho);

/// sqrt of (1-rho)^2 L(B0,B0) + rho^2 L(B1,B1) + 2 rho (1-rho) L(B0,B1), clamped at 0.
/// `kind` must be mmce or mmce_w.
ad::Var groupwise_pairwise(ad::Tape& tape, LossKind kind, ad::Var logits,
                           std::span<const int> labels, std::span<const int> groups, double rho,
                           double gamma = 0.2);

/// The per-kind base loss (ungrouped, without NLL) as a LinearLoss, for the
/// linear kinds.
LinearLoss linear_loss(const LossSpec& spec);

}  // namespace losses

/// The training objective for `spec`:
///   NLL                -> NLL(B)
///   LS, FL, FLSD       -> L(B), or L_g(B) when groupwise
///   DCA, MDCA, MMCE(-W) -> NLL(B) + lambda * (L(B) or L_g(B))
ad::Var total_loss(ad::Tape& tape, const LossSpec& spec, ad::Var logits,
                   std::span<const int> labels, std::span<const int> groups);

double total_loss(const LossSpec& spec, const Tensor2& logits, std::span<const int> labels,
                  std::span<const int> groups);

}  // namespace faircal
