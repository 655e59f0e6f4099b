#include "mano/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mano/kernels.hpp"
#include "mano/linalg.hpp"

namespace mano {

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor order must be at least 1");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " needs " +
                     std::to_string(shape_product(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
  if (!all_finite(data_)) throw ValueError("tensor values must be finite");
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  if (!std::isfinite(value)) throw ValueError("tensor values must be finite");
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t k) const {
  if (k >= shape_.size()) {
    throw AxisError("axis " + std::to_string(k) + " out of range for order " +
                    std::to_string(shape_.size()));
  }
  return shape_[k];
}

std::size_t Tensor::rows() const {
  require_matrix(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_matrix(*this, "cols");
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
  validate_shape(shape);
  if (shape_product(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(Unchecked{}, std::move(shape), data_);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (!a.is_matrix()) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     shape_string(a.shape()));
  }
}

void require_axis(const Tensor& a, std::size_t k, const char* op) {
  if (k >= a.order()) {
    throw AxisError(std::string(op) + ": axis " + std::to_string(k) +
                    " out of range for order " + std::to_string(a.order()));
  }
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  kernels::multiply(a.values(), b.values(), out.values_mut());
  return out;
}

Tensor eltwise_div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "eltwise_div");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (std::abs(b[i]) < kEpsDiv) {
      throw DivisionByZeroError(i, "eltwise_div: zero denominator at linear index " +
                                       std::to_string(i));
    }
  }
  Tensor out(a.shape());
  kernels::divide(a.values(), b.values(), out.values_mut());
  return out;
}

AxisVector dim_inner(const Tensor& a, const Tensor& b, std::size_t k) {
  require_same_shape(a, b, "dim_inner");
  require_axis(a, k, "dim_inner");
  const auto layout = kernels::axis_layout(a.shape(), k);
  AxisVector out{k, std::vector<double>(layout.slices())};
  kernels::axis_inner(a.values(), b.values(), layout, out.values);
  return out;
}

AxisVector dim_norm(const Tensor& a, std::size_t k) {
  require_axis(a, k, "dim_norm");
  AxisVector out = dim_inner(a, a, k);
  for (double& v : out.values) v = std::sqrt(v);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  kernels::gemm(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

std::vector<double> svd_values(const Tensor& a) { return svd(a).singular_values; }

double rms(const Tensor& a) {
  return std::sqrt(kernels::sum_squares(a.values()) / static_cast<double>(a.size()));
}

Tensor broadcast_mul(const Tensor& a, const AxisVector& s) {
  require_axis(a, s.axis, "broadcast_mul");
  const auto layout = kernels::axis_layout(a.shape(), s.axis);
  if (s.size() != layout.slices()) throw ShapeError("broadcast_mul: axis vector length mismatch");
  Tensor out(a.shape());
  kernels::axis_multiply(a.values(), s.values, layout, out.values_mut());
  return out;
}

Tensor broadcast_div(const Tensor& a, const AxisVector& s) {
  require_axis(a, s.axis, "broadcast_div");
  const auto layout = kernels::axis_layout(a.shape(), s.axis);
  if (s.size() != layout.slices()) throw ShapeError("broadcast_div: axis vector length mismatch");
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (std::abs(s[j]) < kEpsDiv) {
      throw DivisionByZeroError(j, "broadcast_div: zero divisor for slice " + std::to_string(j));
    }
  }
  Tensor out(a.shape());
  kernels::axis_divide(a.values(), s.values, layout, out.values_mut());
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor scaled(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.values_mut()) v *= c;
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  Tensor out = a;
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= b[i];
  return out;
}

Tensor operator-(const Tensor& a) { return scaled(a, -1.0); }

double frobenius_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "frobenius_dot");
  return kernels::dot(a.values(), b.values());
}

double frobenius_norm(const Tensor& a) { return std::sqrt(kernels::sum_squares(a.values())); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Tensor random_normal(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values_mut()) v = dist(rng);
  return t;
}

Tensor random_uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values_mut()) v = dist(rng);
  return t;
}

}  // namespace mano
