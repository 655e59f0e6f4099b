#include "mano/manifold.hpp"

#include <algorithm>
#include <cmath>

#include "mano/kernels.hpp"
#include "mano/linalg.hpp"

namespace mano {

namespace {

constexpr double kUnitSliceTolerance = 1e-9;
constexpr double kStiefelRankFloor = 1e-12;

// Great-circle angle between unit vectors as 2 asin(|x - y| / 2). Equal to
// arccos(<x, y>) but keeps full precision near 0, where arccos loses half the
// digits.
double chord_angle(double chord) { return 2.0 * std::asin(std::clamp(0.5 * chord, 0.0, 1.0)); }

}  // namespace

void ManifoldSchedule::validate() const {
  if (order == 0) throw ValueError("manifold schedule order must be positive");
  if (mode == ManifoldMode::static_axis && fixed_axis >= order) {
    throw AxisError("static manifold axis " + std::to_string(fixed_axis) +
                    " out of range for order " + std::to_string(order));
  }
}

std::size_t rotation_axis(const ManifoldSchedule& schedule, std::uint64_t t) {
  schedule.validate();
  if (schedule.mode == ManifoldMode::static_axis) return schedule.fixed_axis;
  return static_cast<std::size_t>(t % schedule.order);
}

Tensor oblique_normalize(const Tensor& a, std::size_t k) {
  const AxisVector norms = dim_norm(a, k);
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (norms[j] < kEpsDiv) {
      throw DegenerateSliceError(j, "oblique_normalize: slice " + std::to_string(j) +
                                        " along axis " + std::to_string(k) + " has zero norm");
    }
  }
  Tensor out(a.shape());
  kernels::axis_divide(a.values(), norms.values, kernels::axis_layout(a.shape(), k),
                       out.values_mut());
  return out;
}

Tensor oblique_normalize_or_zero(const Tensor& a, std::size_t k, std::size_t* degenerate) {
  const AxisVector norms = dim_norm(a, k);
  if (degenerate) {
    *degenerate = static_cast<std::size_t>(
        std::count_if(norms.values.begin(), norms.values.end(), [](double v) { return v < kEpsDiv; }));
  }
  Tensor out(a.shape());
  kernels::axis_divide(a.values(), norms.values, kernels::axis_layout(a.shape(), k),
                       out.values_mut(), kEpsDiv);
  return out;
}

Tensor tangent_project_unchecked(const Tensor& m, const Tensor& theta_hat, std::size_t k) {
  const AxisVector radial = dim_inner(m, theta_hat, k);
  Tensor out(m.shape());
  kernels::axis_subtract_scaled(m.values(), theta_hat.values(), radial.values,
                                kernels::axis_layout(m.shape(), k), out.values_mut());
  return out;
}

Tensor tangent_project(const Tensor& m, const Tensor& theta_hat, std::size_t k) {
  require_same_shape(m, theta_hat, "tangent_project");
  require_axis(m, k, "tangent_project");
  const AxisVector norms = dim_norm(theta_hat, k);
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (std::abs(norms[j] - 1.0) > kUnitSliceTolerance) {
      throw ValueError("tangent_project: base point slice " + std::to_string(j) +
                       " is not unit norm (" + std::to_string(norms[j]) + ")");
    }
  }
  return tangent_project_unchecked(m, theta_hat, k);
}

double geodesic_oblique(const Tensor& x, const Tensor& y, std::size_t k) {
  require_matrix(x, "geodesic_oblique");
  require_same_shape(x, y, "geodesic_oblique");
  const AxisVector chords = dim_norm(oblique_normalize(x, k) - oblique_normalize(y, k), k);
  double acc = 0.0;
  for (double c : chords.values) {
    const double angle = chord_angle(c);
    acc += angle * angle;
  }
  return std::sqrt(acc);
}

double geodesic_sphere(const Tensor& x, const Tensor& y) {
  require_matrix(x, "geodesic_sphere");
  require_same_shape(x, y, "geodesic_sphere");
  const double nx = frobenius_norm(x), ny = frobenius_norm(y);
  if (nx < kEpsDiv || ny < kEpsDiv) throw ValueError("geodesic_sphere: zero matrix");
  return chord_angle(frobenius_norm(scaled(x, 1.0 / nx) - scaled(y, 1.0 / ny)));
}

namespace {

Tensor stiefel_retract(const Tensor& a) {
  const Svd s = svd(a);
  const double smallest = s.singular_values.back();
  // Eigenvalues of X^T X are the squared singular values of X.
  if (smallest * smallest < kStiefelRankFloor) {
    throw ValueError("geodesic_stiefel_approx: input is rank deficient");
  }
  return matmul(s.u, transpose(s.v));
}

}  // namespace

double geodesic_stiefel_approx(const Tensor& x, const Tensor& y) {
  require_matrix(x, "geodesic_stiefel_approx");
  require_same_shape(x, y, "geodesic_stiefel_approx");
  if (x.rows() < x.cols()) throw ShapeError("geodesic_stiefel_approx: needs m >= n");
  const Tensor qx = stiefel_retract(x);
  const Tensor qy = stiefel_retract(y);
  // Principal angles from their cosines (sigma of Qx^T Qy, descending) and
  // sines (sigma of (I - Qx Qx^T) Qy, ascending); atan2 stays accurate at
  // both ends where arccos or arcsin alone would not.
  const Tensor overlap = matmul(transpose(qx), qy);
  const auto cosines = svd_values(overlap);
  auto sines = svd_values(qy - matmul(qx, overlap));
  std::reverse(sines.begin(), sines.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    const double angle = std::atan2(sines[i], std::clamp(cosines[i], -1.0, 1.0));
    acc += angle * angle;
  }
  return std::sqrt(acc);
}

Tensor sinkhorn_normalize(const Tensor& a, std::size_t iterations) {
  require_matrix(a, "sinkhorn_normalize");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0)) {
      throw ValueError("sinkhorn_normalize: entry " + std::to_string(i) + " is not positive");
    }
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a;
  std::vector<double> sums;
  for (std::size_t it = 0; it < iterations; ++it) {
    sums.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) sums[i] += out.at(i, j);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= sums[i];
    }
    sums.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) sums[j] += out.at(i, j);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= sums[j];
    }
  }
  return out;
}

}  // namespace mano
