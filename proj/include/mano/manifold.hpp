#pragma once

#include <cstddef>
#include <cstdint>

#include "mano/tensor.hpp"

namespace mano {

enum class ManifoldMode { rotating, static_axis };

/// Which axis the Oblique constraint normalizes at step t.
struct ManifoldSchedule {
  ManifoldMode mode = ManifoldMode::rotating;
  std::size_t fixed_axis = 0;
  std::size_t order = 2;

  static ManifoldSchedule rotating(std::size_t order = 2) {
    return {ManifoldMode::rotating, 0, order};
  }
  static ManifoldSchedule fixed(std::size_t axis, std::size_t order = 2) {
    return {ManifoldMode::static_axis, axis, order};
  }

  void validate() const;
};

// Rotating: t mod order. Static: fixed_axis.
std::size_t rotation_axis(const ManifoldSchedule& schedule, std::uint64_t t);

/// A / ||A||_{2,k}. Throws DegenerateSliceError naming the first slice whose
/// norm is below kEpsDiv.
Tensor oblique_normalize(const Tensor& a, std::size_t k);

/// Like oblique_normalize but degenerate slices come back as zeros. Returns the
/// number of degenerate slices through `degenerate` when non-null.
Tensor oblique_normalize_or_zero(const Tensor& a, std::size_t k,
                                 std::size_t* degenerate = nullptr);

/// M - theta_hat (.) <M, theta_hat>_k. theta_hat must have unit axis-k slices
/// (within 1e-9).
Tensor tangent_project(const Tensor& m, const Tensor& theta_hat, std::size_t k);

// Same projection without the unit-slice check; the caller guarantees it.
Tensor tangent_project_unchecked(const Tensor& m, const Tensor& theta_hat, std::size_t k);

/// Product-of-spheres distance: sqrt(sum_j arccos(<x_j, y_j>)^2) over axis-k
/// slices, after normalizing both inputs along k.
double geodesic_oblique(const Tensor& x, const Tensor& y, std::size_t k = 0);

/// Great-circle distance between X/||X||_F and Y/||Y||_F.
double geodesic_sphere(const Tensor& x, const Tensor& y);

/// Principal-angle distance after polar retraction of both inputs:
/// sqrt(sum_i arccos(sigma_i(Qx^T Qy))^2). Requires m >= n and full column rank
/// (smallest singular value of X^T X at least 1e-12).
double geodesic_stiefel_approx(const Tensor& x, const Tensor& y);

/// Alternating row-then-column sum normalization, `iterations` rounds.
Tensor sinkhorn_normalize(const Tensor& a, std::size_t iterations);

}  // namespace mano
