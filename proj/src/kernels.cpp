#include "mano/kernels.hpp"

#include <cblas.h>
#include <omp.h>

#include <algorithm>
#include <vector>

namespace mano::kernels {

namespace {

// Below this many elements the loops stay serial.
constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;
constexpr std::size_t kReduceChunk = 4096;
constexpr std::size_t kInnerChunk = 512;

bool go_parallel(std::size_t n) { return n >= kParallelThreshold && omp_get_max_threads() > 1; }

// Work items for the axis kernels: one per (outer index, chunk of inner).
struct AxisTasks {
  std::size_t chunks_per_outer;
  std::size_t count;
};

AxisTasks axis_tasks(AxisLayout l) {
  const std::size_t per = (l.inner + kInnerChunk - 1) / kInnerChunk;
  return {per, l.outer * per};
}

}  // namespace

AxisLayout axis_layout(const Shape& shape, std::size_t k) {
  AxisLayout l;
  for (std::size_t d = 0; d < k; ++d) l.outer *= shape[d];
  l.extent = shape[k];
  for (std::size_t d = k + 1; d < shape.size(); ++d) l.inner *= shape[d];
  return l;
}

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (go_parallel(out.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void divide(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (go_parallel(out.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static) if (go_parallel(n))
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
    const std::size_t hi = std::min(n, lo + kReduceChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += a[i] * b[i];
    partial[c] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double sum_squares(std::span<const double> a) { return dot(a, a); }

void axis_inner(std::span<const double> a, std::span<const double> b, AxisLayout l,
                std::span<double> out) {
  const AxisTasks tasks = axis_tasks(l);
#pragma omp parallel for schedule(static) if (go_parallel(l.size()))
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.count); ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / tasks.chunks_per_outer;
    const std::size_t lo = (static_cast<std::size_t>(t) % tasks.chunks_per_outer) * kInnerChunk;
    const std::size_t hi = std::min(l.inner, lo + kInnerChunk);
    double* acc = out.data() + o * l.inner;
    for (std::size_t i = lo; i < hi; ++i) acc[i] = 0.0;
    const std::size_t base = o * l.extent * l.inner;
    for (std::size_t r = 0; r < l.extent; ++r) {
      const double* pa = a.data() + base + r * l.inner;
      const double* pb = b.data() + base + r * l.inner;
      for (std::size_t i = lo; i < hi; ++i) acc[i] += pa[i] * pb[i];
    }
  }
}

void axis_divide(std::span<const double> a, std::span<const double> d, AxisLayout l,
                 std::span<double> out, double zero_below) {
  const AxisTasks tasks = axis_tasks(l);
#pragma omp parallel for schedule(static) if (go_parallel(l.size()))
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.count); ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / tasks.chunks_per_outer;
    const std::size_t lo = (static_cast<std::size_t>(t) % tasks.chunks_per_outer) * kInnerChunk;
    const std::size_t hi = std::min(l.inner, lo + kInnerChunk);
    const double* div = d.data() + o * l.inner;
    const std::size_t base = o * l.extent * l.inner;
    for (std::size_t r = 0; r < l.extent; ++r) {
      const double* pa = a.data() + base + r * l.inner;
      double* po = out.data() + base + r * l.inner;
      for (std::size_t i = lo; i < hi; ++i) {
        po[i] = div[i] < zero_below ? 0.0 : pa[i] / div[i];
      }
    }
  }
}

void axis_multiply(std::span<const double> a, std::span<const double> s, AxisLayout l,
                   std::span<double> out) {
  const AxisTasks tasks = axis_tasks(l);
#pragma omp parallel for schedule(static) if (go_parallel(l.size()))
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.count); ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / tasks.chunks_per_outer;
    const std::size_t lo = (static_cast<std::size_t>(t) % tasks.chunks_per_outer) * kInnerChunk;
    const std::size_t hi = std::min(l.inner, lo + kInnerChunk);
    const double* sc = s.data() + o * l.inner;
    const std::size_t base = o * l.extent * l.inner;
    for (std::size_t r = 0; r < l.extent; ++r) {
      const double* pa = a.data() + base + r * l.inner;
      double* po = out.data() + base + r * l.inner;
      for (std::size_t i = lo; i < hi; ++i) po[i] = pa[i] * sc[i];
    }
  }
}

void axis_subtract_scaled(std::span<const double> m, std::span<const double> p,
                          std::span<const double> c, AxisLayout l, std::span<double> out) {
  const AxisTasks tasks = axis_tasks(l);
#pragma omp parallel for schedule(static) if (go_parallel(l.size()))
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.count); ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / tasks.chunks_per_outer;
    const std::size_t lo = (static_cast<std::size_t>(t) % tasks.chunks_per_outer) * kInnerChunk;
    const std::size_t hi = std::min(l.inner, lo + kInnerChunk);
    const double* coef = c.data() + o * l.inner;
    const std::size_t base = o * l.extent * l.inner;
    for (std::size_t r = 0; r < l.extent; ++r) {
      const std::size_t row = base + r * l.inner;
      for (std::size_t i = lo; i < hi; ++i) out[row + i] = m[row + i] - p[row + i] * coef[i];
    }
  }
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, static_cast<int>(k), b,
              static_cast<int>(n), 0.0, c, static_cast<int>(n));
}

namespace reference {

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
}

void divide(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares(std::span<const double> a) { return dot(a, a); }

void axis_inner(std::span<const double> a, std::span<const double> b, AxisLayout l,
                std::span<double> out) {
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < l.extent; ++r) {
        const std::size_t idx = (o * l.extent + r) * l.inner + i;
        acc += a[idx] * b[idx];
      }
      out[o * l.inner + i] = acc;
    }
  }
}

void axis_divide(std::span<const double> a, std::span<const double> d, AxisLayout l,
                 std::span<double> out, double zero_below) {
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const double div = d[o * l.inner + i];
      for (std::size_t r = 0; r < l.extent; ++r) {
        const std::size_t idx = (o * l.extent + r) * l.inner + i;
        out[idx] = div < zero_below ? 0.0 : a[idx] / div;
      }
    }
  }
}

void axis_multiply(std::span<const double> a, std::span<const double> s, AxisLayout l,
                   std::span<double> out) {
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      for (std::size_t r = 0; r < l.extent; ++r) {
        const std::size_t idx = (o * l.extent + r) * l.inner + i;
        out[idx] = a[idx] * s[o * l.inner + i];
      }
    }
  }
}

void axis_subtract_scaled(std::span<const double> m, std::span<const double> p,
                          std::span<const double> c, AxisLayout l, std::span<double> out) {
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      for (std::size_t r = 0; r < l.extent; ++r) {
        const std::size_t idx = (o * l.extent + r) * l.inner + i;
        out[idx] = m[idx] - p[idx] * c[o * l.inner + i];
      }
    }
  }
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace reference

ThreadCountGuard::ThreadCountGuard(int threads)
    : previous_omp_(omp_get_max_threads()), previous_blas_(openblas_get_num_threads()) {
  omp_set_num_threads(threads);
  openblas_set_num_threads(threads);
}

ThreadCountGuard::~ThreadCountGuard() {
  omp_set_num_threads(previous_omp_);
  openblas_set_num_threads(previous_blas_);
}

}  // namespace mano::kernels
