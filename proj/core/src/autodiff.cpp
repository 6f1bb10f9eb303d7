#include "faircal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "faircal/errors.hpp"

namespace faircal::ad {

namespace {

void require_same_shape(const char* op, const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void require_column(const char* op, const Tensor2& a) {
  if (a.cols() != 1) throw ShapeError(std::string(op) + ": expected a column vector");
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("autodiff: use of an empty Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw Error("autodiff: operands recorded on different tapes");
  return t;
}

// Elementwise unary op with derivative expressed through input value x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return tape.record(std::move(y), {a}, [a, dfdx](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    const Tensor2& xv = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * dfdx(xv[i]);
  });
}

}  // namespace

const Tensor2& Var::value() const {
  if (tape_ == nullptr) throw Error("autodiff: value() on an empty Var");
  return tape_->value(*this);
}

void Tape::check(Var v, const char* what) const {
  if (!owns(v)) throw Error(std::string("autodiff: ") + what + ": Var is not recorded on this tape");
}

Var Tape::variable(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

const Tensor2& Tape::value(Var v) const {
  check(v, "value");
  return nodes_[v.id()].value;
}

Tensor2 Tape::gradient(Var v) const {
  check(v, "gradient");
  const Node& node = nodes_[v.id()];
  if (node.adjoint.size() != node.value.size()) {
    return Tensor2(node.value.rows(), node.value.cols());
  }
  return node.adjoint;
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, Backward backward) {
  bool grad = false;
  for (Var in : inputs) {
    check(in, "record");
    grad = grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, grad, grad ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor2* Tape::grad_slot(Var v) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  if (node.adjoint.size() != node.value.size()) {
    node.adjoint = Tensor2(node.value.rows(), node.value.cols());
  }
  return &node.adjoint;
}

void Tape::backward(Var loss) {
  check(loss, "backward");
  const Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("autodiff: backward() needs a 1x1 loss");
  }
  for (Node& node : nodes_) node.adjoint = Tensor2();
  if (!root.requires_grad) return;
  *grad_slot(loss) = Tensor2::scalar(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.adjoint.size() != node.value.size()) continue;
    // The closure may touch other nodes' adjoints but never this node's.
    const Tensor2 adjoint = std::move(node.adjoint);
    node.backward(*this, adjoint);
    node.adjoint = adjoint;
  }
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  return tape.record(faircal::matmul(a.value(), b.value()), {a, b},
                     [a, b](Tape& t, const Tensor2& g) {
                       if (Tensor2* ga = t.grad_slot(a)) {
                         Tensor2 d = matmul_nt(g, t.value(b));
                         for (std::size_t i = 0; i < d.size(); ++i) (*ga)[i] += d[i];
                       }
                       if (Tensor2* gb = t.grad_slot(b)) {
                         Tensor2 d = matmul_tn(t.value(a), g);
                         for (std::size_t i = 0; i < d.size(); ++i) (*gb)[i] += d[i];
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor2 y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (Tensor2* ga = t.grad_slot(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor2* gb = t.grad_slot(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor2 y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (Tensor2* ga = t.grad_slot(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor2* gb = t.grad_slot(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor2 y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (Tensor2* ga = t.grad_slot(a)) {
      const Tensor2& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor2* gb = t.grad_slot(b)) {
      const Tensor2& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  Tape& tape = tape_of(a, bias);
  const Tensor2& x = a.value();
  const Tensor2& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
  Tensor2 y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return tape.record(std::move(y), {a, bias}, [a, bias](Tape& t, const Tensor2& g) {
    if (Tensor2* ga = t.grad_slot(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor2* gb = t.grad_slot(bias)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) (*gb)[c] += row[c];
      }
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sqrt(Var a) {
  return unary(
      a,
      [](double x) {
        if (x < 0.0) throw NumericError("sqrt of a negative value");
        return std::sqrt(x);
      },
      [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

Var pow(Var a, double exponent) {
  return unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x) {
        if (exponent == 0.0) return 0.0;
        if (exponent == 1.0) return 1.0;
        return exponent * std::pow(x, exponent - 1.0);
      });
}

Var pow(Var a, const Tensor2& exponents) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  require_same_shape("pow", x, exponents);
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::pow(x[i], exponents[i]);
  return tape.record(std::move(y), {a}, [a, exponents](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    const Tensor2& xv = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double e = exponents[i];
      if (e == 0.0) continue;
      (*ga)[i] += g[i] * (e == 1.0 ? 1.0 : e * std::pow(xv[i], e - 1.0));
    }
  });
}

Var clamp_min(Var a, double floor) {
  return unary(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x) { return x > floor ? 1.0 : 0.0; });
}

Var softmax_rows(Var logits) {
  Tape& tape = tape_of(logits);
  Tensor2 y = faircal::softmax_rows(logits.value());
  return tape.record(std::move(y), {logits}, [logits](Tape& t, const Tensor2& g) {
    Tensor2* gl = t.grad_slot(logits);
    if (gl == nullptr) return;
    const Tensor2 p = faircal::softmax_rows(t.value(logits));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto pr = p.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t k = 0; k < pr.size(); ++k) dot += gr[k] * pr[k];
      for (std::size_t k = 0; k < pr.size(); ++k) (*gl)(r, k) += pr[k] * (gr[k] - dot);
    }
  });
}

Var log_softmax_rows(Var logits) {
  Tape& tape = tape_of(logits);
  Tensor2 y = faircal::log_softmax_rows(logits.value());
  return tape.record(std::move(y), {logits}, [logits](Tape& t, const Tensor2& g) {
    Tensor2* gl = t.grad_slot(logits);
    if (gl == nullptr) return;
    const Tensor2 p = faircal::softmax_rows(t.value(logits));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto pr = p.row(r);
      auto gr = g.row(r);
      double total = 0.0;
      for (double v : gr) total += v;
      for (std::size_t k = 0; k < pr.size(); ++k) (*gl)(r, k) += gr[k] - pr[k] * total;
    }
  });
}

Var row_max(Var a) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  if (x.cols() == 0) throw ShapeError("row_max: zero columns");
  std::vector<std::size_t> where(x.rows());
  Tensor2 y(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    where[r] = faircal::argmax(x.row(r));
    y(r, 0) = x(r, where[r]);
  }
  return tape.record(std::move(y), {a}, [a, where = std::move(where)](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t r = 0; r < where.size(); ++r) (*ga)(r, where[r]) += g(r, 0);
  });
}

Var pick(Var a, std::span<const int> cols) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  if (cols.size() != x.rows()) throw ShapeError("pick: one index per row required");
  std::vector<int> idx(cols.begin(), cols.end());
  Tensor2 y(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= x.cols()) {
      throw ShapeError("pick: column index out of range");
    }
    y(r, 0) = x(r, static_cast<std::size_t>(idx[r]));
  }
  return tape.record(std::move(y), {a}, [a, idx = std::move(idx)](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      (*ga)(r, static_cast<std::size_t>(idx[r])) += g(r, 0);
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor2 y(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw ShapeError("gather_rows: row index out of range");
    std::copy(x.row(idx[i]).begin(), x.row(idx[i]).end(), y.row(i).begin());
  }
  return tape.record(std::move(y), {a}, [a, idx = std::move(idx)](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = g.row(i);
      auto dst = ga->row(idx[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var row_sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  Tensor2 y(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double v : x.row(r)) y(r, 0) += v;
  }
  return tape.record(std::move(y), {a}, [a](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t r = 0; r < ga->rows(); ++r) {
      for (double& v : ga->row(r)) v += g(r, 0);
    }
  });
}

Var col_mean(Var a) {
  Tape& tape = tape_of(a);
  const Tensor2& x = a.value();
  if (x.rows() == 0) throw ShapeError("col_mean: no rows");
  Tensor2 y(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) y[c] += x(r, c);
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : y.values()) v *= inv;
  return tape.record(std::move(y), {a}, [a, inv](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t r = 0; r < ga->rows(); ++r) {
      for (std::size_t c = 0; c < ga->cols(); ++c) (*ga)(r, c) += g[c] * inv;
    }
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.record(Tensor2::scalar(total), {a}, [a](Tape& t, const Tensor2& g) {
    Tensor2* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (double& v : ga->values()) v += g[0];
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

namespace {

// For every query x_i, the weighted kernel mass of the points strictly below,
// exactly at, and strictly above it:
//   below_i = sum_{p_j < x_i} a_j exp(-c (x_i - p_j)),  above_i likewise,
//   equal_i = sum_{p_j == x_i} a_j.
// Two sorted sweeps; each running sum is only ever multiplied by factors <= 1.
struct OneSided {
  std::vector<double> below, equal, above;
};

std::vector<std::size_t> sorted_order(const Tensor2& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b] || (v[a] == v[b] && a < b);
  });
  return order;
}

OneSided one_sided_sums(const Tensor2& x, const Tensor2& p, const Tensor2& a, double c) {
  const std::size_t n = x.size();
  const std::size_t m = p.size();
  const auto qx = sorted_order(x);
  const auto qp = sorted_order(p);
  OneSided out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
               std::vector<double>(n, 0.0)};

  // Upward sweep: `acc` holds sum_{p_j < pos} a_j exp(-c (pos - p_j)).
  double acc = 0.0;
  double pos = 0.0;
  bool started = false;
  std::size_t j = 0;
  for (std::size_t qi = 0; qi < n; ++qi) {
    const std::size_t i = qx[qi];
    const double xi = x[i];
    while (j < m && p[qp[j]] < xi) {
      const double pj = p[qp[j]];
      if (started) acc *= std::exp(-c * (pj - pos));
      acc += a[qp[j]];
      pos = pj;
      started = true;
      ++j;
    }
    if (started) out.below[i] = acc * std::exp(-c * (xi - pos));
  }

  // Downward sweep for the points strictly above, plus exact ties.
  acc = 0.0;
  started = false;
  std::size_t k = m;
  for (std::size_t qi = n; qi-- > 0;) {
    const std::size_t i = qx[qi];
    const double xi = x[i];
    while (k > 0 && p[qp[k - 1]] > xi) {
      const double pk = p[qp[k - 1]];
      if (started) acc *= std::exp(-c * (pos - pk));
      acc += a[qp[k - 1]];
      pos = pk;
      started = true;
      --k;
    }
    if (started) out.above[i] = acc * std::exp(-c * (pos - xi));
    double tie = 0.0;
    for (std::size_t t = k; t > 0 && p[qp[t - 1]] == xi; --t) tie += a[qp[t - 1]];
    out.equal[i] = tie;
  }
  return out;
}

}  // namespace

Var laplacian_pair_mean(Var u, Var r, Var w, Var s, double gamma) {
  Tape& tape = tape_of(u, r);
  tape_of(u, w);
  tape_of(u, s);
  if (!(gamma > 0.0)) throw Error("laplacian_pair_mean: bandwidth must be positive");
  const Tensor2& uv = u.value();
  const Tensor2& rv = r.value();
  const Tensor2& wv = w.value();
  const Tensor2& sv = s.value();
  require_column("laplacian_pair_mean", uv);
  require_column("laplacian_pair_mean", wv);
  require_same_shape("laplacian_pair_mean", uv, rv);
  require_same_shape("laplacian_pair_mean", wv, sv);
  const std::size_t n = uv.rows();
  const std::size_t m = wv.rows();
  if (n == 0 || m == 0) throw ShapeError("laplacian_pair_mean: empty block");
  if (!all_finite(rv) || !all_finite(sv)) {
    throw NumericError("laplacian_pair_mean: non-finite kernel argument");
  }
  const double c = 1.0 / (2.0 * gamma);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(m));

  const OneSided at_r = one_sided_sums(rv, sv, wv, c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += uv[i] * (at_r.below[i] + at_r.equal[i] + at_r.above[i]);
  }

  return tape.record(
      Tensor2::scalar(total * norm), {u, r, w, s},
      [u, r, w, s, c, norm](Tape& t, const Tensor2& g) {
        const Tensor2& uv = t.value(u);
        const Tensor2& rv = t.value(r);
        const Tensor2& wv = t.value(w);
        const Tensor2& sv = t.value(s);
        Tensor2* gu = t.grad_slot(u);
        Tensor2* gr = t.grad_slot(r);
        Tensor2* gw = t.grad_slot(w);
        Tensor2* gs = t.grad_slot(s);
        const double scale = g[0] * norm;
        // The kernel has zero slope at coincident points.
        if (gu || gr) {
          const OneSided at_r = one_sided_sums(rv, sv, wv, c);
          for (std::size_t i = 0; i < uv.rows(); ++i) {
            if (gu) (*gu)[i] += scale * (at_r.below[i] + at_r.equal[i] + at_r.above[i]);
            if (gr) (*gr)[i] += scale * uv[i] * c * (at_r.above[i] - at_r.below[i]);
          }
        }
        if (gw || gs) {
          const OneSided at_s = one_sided_sums(sv, rv, uv, c);
          for (std::size_t j = 0; j < wv.rows(); ++j) {
            if (gw) (*gw)[j] += scale * (at_s.below[j] + at_s.equal[j] + at_s.above[j]);
            if (gs) (*gs)[j] += scale * wv[j] * c * (at_s.above[j] - at_s.below[j]);
          }
        }
      });
}

}  // namespace faircal::ad
