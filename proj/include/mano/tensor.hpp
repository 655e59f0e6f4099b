#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mano {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class AxisError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

class DivisionByZeroError : public Error {
 public:
  DivisionByZeroError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// A slice along the reduced axis whose norm is below kEpsDiv.
class DegenerateSliceError : public Error {
 public:
  DegenerateSliceError(std::size_t slice, const std::string& what)
      : Error(what), slice_(slice) {}
  std::size_t slice() const { return slice_; }

 private:
  std::size_t slice_;
};

// Denominators with magnitude below this are treated as zero.
inline constexpr double kEpsDiv = 1e-30;

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles. Order >= 1, every extent positive.
///
/// The public constructors reject non-finite values. `values_mut()` exists for
/// kernels and the training loop; callers writing through it own the
/// finiteness invariant.
class Tensor {
 public:
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor identity(std::size_t n);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t k) const;
  bool is_matrix() const { return shape_.size() == 2; }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return data_; }
  std::span<double> values_mut() { return data_; }
  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  struct Unchecked {};
  Tensor(Unchecked, Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  Shape shape_;
  std::vector<double> data_;
};

/// Result of a reduction along one axis. For an m x n matrix, axis 0 yields n
/// values (one per column) and axis 1 yields m values (one per row).
struct AxisVector {
  std::size_t axis = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor eltwise_div(const Tensor& a, const Tensor& b);

// k names the reduced axis.
AxisVector dim_inner(const Tensor& a, const Tensor& b, std::size_t k);
AxisVector dim_norm(const Tensor& a, std::size_t k);

Tensor matmul(const Tensor& a, const Tensor& b);

/// Singular values in descending order (one-sided Jacobi). Requires a matrix
/// with min(m, n) <= 512.
std::vector<double> svd_values(const Tensor& a);

double rms(const Tensor& a);

// Broadcast a per-slice vector back along its axis.
Tensor broadcast_mul(const Tensor& a, const AxisVector& s);
Tensor broadcast_div(const Tensor& a, const AxisVector& s);

Tensor transpose(const Tensor& a);
Tensor scaled(const Tensor& a, double c);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
double frobenius_dot(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(std::span<const double> values);

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);
void require_matrix(const Tensor& a, const char* op);
void require_axis(const Tensor& a, std::size_t k, const char* op);

Tensor random_normal(Shape shape, std::mt19937_64& rng, double stddev = 1.0);
Tensor random_uniform(Shape shape, std::mt19937_64& rng, double lo, double hi);

}  // namespace mano
