#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "faircal/tensor.hpp"

namespace faircal::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor2& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Wengert list for one forward pass. Nodes are appended in evaluation order,
/// so reverse iteration is a valid topological order for the adjoint sweep.
class Tape {
 public:
  /// Called with the output adjoint; accumulates into input adjoints.
  using Backward = std::function<void(Tape&, const Tensor2& out_adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor2 value);
  Var constant(Tensor2 value);

  const Tensor2& value(Var v) const;
  /// Adjoint after backward(); zero-filled if the node was never reached.
  Tensor2 gradient(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. The loss must
  /// be a 1x1 node recorded on this tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool owns(Var v) const { return v.tape() == this && v.id() < nodes_.size(); }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Used by op implementations.
  Var record(Tensor2 value, std::initializer_list<Var> inputs, Backward backward);
  /// Adjoint buffer of an input, or nullptr when it does not need a gradient.
  Tensor2* grad_slot(Var v);

 private:
  struct Node {
    Tensor2 value;
    Tensor2 adjoint;
    bool requires_grad = false;
    Backward backward;
  };

  void check(Var v, const char* what) const;

  std::vector<Node> nodes_;
};

// Linear algebra and elementwise ops.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (n x c) plus a 1 x c row broadcast over rows.
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var relu(Var a);
Var exp(Var a);
Var abs(Var a);
/// Subgradient 0 is used at exactly 0.
Var sqrt(Var a);
Var pow(Var a, double exponent);
/// Elementwise exponents held constant.
Var pow(Var a, const Tensor2& exponents);
Var clamp_min(Var a, double floor);

// Row-wise and reduction ops.
Var softmax_rows(Var logits);
Var log_softmax_rows(Var logits);
/// n x 1 row maxima; the subgradient goes to the lowest maximizing index.
Var row_max(Var a);
/// n x 1 with out[i] = a[i, cols[i]].
Var pick(Var a, std::span<const int> cols);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var row_sum(Var a);
Var col_mean(Var a);
Var sum(Var a);
Var mean(Var a);

/// (1 / (|u| |w|)) * sum_ij u_i w_j exp(-|r_i - s_j| / (2 gamma)), all inputs
/// column vectors. Fused so the |u| x |w| kernel matrix is never stored.
Var laplacian_pair_mean(Var u, Var r, Var w, Var s, double gamma);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(double s, Var a) { return add_scalar(scale(a, -1.0), s); }

}  // namespace faircal::ad
