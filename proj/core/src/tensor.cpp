#include "faircal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "faircal/errors.hpp"

namespace faircal {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

ConstMap view(const Tensor2& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

Map view(Tensor2& t) {
  return Map(t.values().data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor2& a, const Tensor2& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                   std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                   std::to_string(b.cols()));
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t k = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(n * k);
  for (const auto& r : rows) {
    if (r.size() != k) throw ShapeError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor2(n, k, std::move(data));
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor2 out(a.rows(), b.cols());
  if (a.rows() > 0 && b.cols() > 0 && a.cols() > 0) view(out).noalias() = view(a) * view(b);
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  Tensor2 out(a.cols(), b.cols());
  if (a.rows() > 0 && out.size() > 0) view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  Tensor2 out(a.rows(), b.rows());
  if (a.cols() > 0 && out.size() > 0) view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

bool all_finite(const Tensor2& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      dst[k] = std::exp(in[k] - peak);
      total += dst[k];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

Tensor2 log_softmax_rows(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - peak);
    const double log_norm = peak + std::log(total);
    for (std::size_t k = 0; k < in.size(); ++k) dst[k] = in[k] - log_norm;
  }
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

}  // namespace faircal
