#include "mano/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mano {

namespace {

// Jacobi on the columns of a tall (m >= n) matrix, stored column-major.
Svd jacobi_tall(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> w(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) w[j * m + i] = a.at(i, j);
  }
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  const double frob_sq = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  const double eps = std::numeric_limits<double>::epsilon();
  int sweeps = 0;
  if (frob_sq > 0.0) {
    for (; sweeps < kJacobiMaxSweeps; ++sweeps) {
      double off_sq = 0.0;
      bool rotated = false;
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          double* wp = &w[p * m];
          double* wq = &w[q * m];
          double alpha = 0.0, beta = 0.0, gamma = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            alpha += wp[i] * wp[i];
            beta += wq[i] * wq[i];
            gamma += wp[i] * wq[i];
          }
          off_sq += gamma * gamma;
          if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
          rotated = true;
          const double zeta = (beta - alpha) / (2.0 * gamma);
          const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = c * t;
          for (std::size_t i = 0; i < m; ++i) {
            const double x = wp[i], y = wq[i];
            wp[i] = c * x - s * y;
            wq[i] = s * x + c * y;
          }
          double* vp = &v[p * n];
          double* vq = &v[q * n];
          for (std::size_t i = 0; i < n; ++i) {
            const double x = vp[i], y = vq[i];
            vp[i] = c * x - s * y;
            vq[i] = s * x + c * y;
          }
        }
      }
      if (!rotated || std::sqrt(off_sq) / frob_sq < kJacobiOffTolerance) {
        ++sweeps;
        break;
      }
    }
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += w[j * m + i] * w[j * m + i];
    sigma[j] = std::sqrt(acc);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Tensor({m, n}), std::vector<double>(n), Tensor({n, n}), sweeps};
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    out.singular_values[r] = sigma[j];
    if (sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u.at(i, r) = w[j * m + i] / sigma[j];
    }
    for (std::size_t i = 0; i < n; ++i) out.v.at(i, r) = v[j * n + i];
  }
  return out;
}

}  // namespace

Svd svd(const Tensor& a) {
  require_matrix(a, "svd");
  if (std::min(a.rows(), a.cols()) > kSvdMaxMinDim) {
    throw ShapeError("svd: min dimension exceeds " + std::to_string(kSvdMaxMinDim));
  }
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  Svd t = jacobi_tall(transpose(a));
  return Svd{std::move(t.v), std::move(t.singular_values), std::move(t.u), t.sweeps};
}

Tensor polar_factor(const Tensor& a) {
  const Svd s = svd(a);
  return matmul(s.u, transpose(s.v));
}

Tensor column(const Tensor& a, std::size_t j) {
  require_matrix(a, "column");
  if (j >= a.cols()) throw AxisError("column: index " + std::to_string(j) + " out of range");
  Tensor out({a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = a.at(i, j);
  return out;
}

}  // namespace mano
