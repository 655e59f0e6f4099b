#pragma once

// Data-parallel inner loops behind the tensor operators.
//
// Every kernel has a serial twin in `kernels::reference` with the same
// signature. The reference versions are the plain loops the parallel ones
// must agree with; tests compare the two and bench/kernel_bench times them.
//
// Reductions are chunked with a fixed chunk size and combined in chunk order,
// so results do not depend on the OpenMP thread count.

#include <cstddef>
#include <span>

#include "mano/tensor.hpp"

namespace mano::kernels {

/// Row-major view of a tensor as (outer, extent, inner) around axis k.
/// Slice j = o * inner + i collects the `extent` entries at
/// o * extent * inner + r * inner + i.
struct AxisLayout {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;

  std::size_t slices() const { return outer * inner; }
  std::size_t size() const { return outer * extent * inner; }
};

AxisLayout axis_layout(const Shape& shape, std::size_t k);

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out);
void divide(std::span<const double> a, std::span<const double> b, std::span<double> out);
double sum_squares(std::span<const double> a);
double dot(std::span<const double> a, std::span<const double> b);

// out[j] = sum over the axis of a * b within slice j.
void axis_inner(std::span<const double> a, std::span<const double> b, AxisLayout layout,
                std::span<double> out);
// out = a / d[slice]; slices with d below `zero_below` are written as zeros.
void axis_divide(std::span<const double> a, std::span<const double> d, AxisLayout layout,
                 std::span<double> out, double zero_below = 0.0);
// out = a * s[slice].
void axis_multiply(std::span<const double> a, std::span<const double> s, AxisLayout layout,
                   std::span<double> out);
// out = m - p * c[slice]; the tangent-space projection.
void axis_subtract_scaled(std::span<const double> m, std::span<const double> p,
                          std::span<const double> c, AxisLayout layout, std::span<double> out);

// Row-major C(m x n) = A(m x k) * B(k x n). OpenBLAS dgemm.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n);

namespace reference {

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out);
void divide(std::span<const double> a, std::span<const double> b, std::span<double> out);
double sum_squares(std::span<const double> a);
double dot(std::span<const double> a, std::span<const double> b);
void axis_inner(std::span<const double> a, std::span<const double> b, AxisLayout layout,
                std::span<double> out);
void axis_divide(std::span<const double> a, std::span<const double> d, AxisLayout layout,
                 std::span<double> out, double zero_below = 0.0);
void axis_multiply(std::span<const double> a, std::span<const double> s, AxisLayout layout,
                   std::span<double> out);
void axis_subtract_scaled(std::span<const double> m, std::span<const double> p,
                          std::span<const double> c, AxisLayout layout, std::span<double> out);
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n);

}  // namespace reference

// Scoped override of the OpenMP and BLAS thread counts.
class ThreadCountGuard {
 public:
  explicit ThreadCountGuard(int threads);
  ~ThreadCountGuard();
  ThreadCountGuard(const ThreadCountGuard&) = delete;
  ThreadCountGuard& operator=(const ThreadCountGuard&) = delete;

 private:
  int previous_omp_;
  int previous_blas_;
};

}  // namespace mano::kernels
