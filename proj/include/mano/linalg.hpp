#pragma once

#include <cstddef>
#include <vector>

#include "mano/tensor.hpp"

namespace mano {

inline constexpr std::size_t kSvdMaxMinDim = 512;
inline constexpr int kJacobiMaxSweeps = 60;
inline constexpr double kJacobiOffTolerance = 1e-12;

/// Thin SVD A = U diag(s) V^T with s sorted descending. For an m x n input,
/// U is m x r, V is n x r, r = min(m, n). Columns of U whose singular value is
/// exactly zero are left as zero vectors.
struct Svd {
  Tensor u;
  std::vector<double> singular_values;
  Tensor v;
  int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi. Sweeps until the off-diagonal Gram mass,
/// sqrt(sum_{p<q} <a_p, a_q>^2) / ||A||_F^2, drops below 1e-12 or 60 sweeps.
Svd svd(const Tensor& a);

// U V^T from the thin SVD; the orthogonal polar factor of a full-rank matrix.
Tensor polar_factor(const Tensor& a);

Tensor column(const Tensor& a, std::size_t j);

}  // namespace mano
