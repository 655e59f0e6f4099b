#include <doctest.h>

#include <omp.h>

#include "mano/kernels.hpp"
#include "mano/tensor.hpp"

using namespace mano;
namespace k = mano::kernels;

namespace {

// The sandbox may have one core; oversubscribe so the parallel paths run.
struct Oversubscribe {
  k::ThreadCountGuard guard{4};
};

void check_close(std::span<const double> a, std::span<const double> b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

}  // namespace

TEST_CASE("axis_layout") {
  const auto l = k::axis_layout({3, 4, 5}, 1);
  CHECK(l.outer == 3);
  CHECK(l.extent == 4);
  CHECK(l.inner == 5);
  CHECK(l.slices() == 15);
  CHECK(k::axis_layout({7}, 0).slices() == 1);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Oversubscribe threads;
  REQUIRE(omp_get_max_threads() == 4);
  std::mt19937_64 rng(21);
  // Large enough to cross the parallel threshold, odd sizes for ragged chunks.
  for (const Shape& shape : {Shape{515, 131}, Shape{129, 517}, Shape{17, 33, 71}, Shape{70001}}) {
    const Tensor a = random_normal(shape, rng), b = random_normal(shape, rng);
    const Tensor pos = random_uniform(shape, rng, 0.5, 2.0);
    std::vector<double> got(a.size()), want(a.size());

    k::multiply(a.values(), b.values(), got);
    k::reference::multiply(a.values(), b.values(), want);
    CHECK(got == want);
    k::divide(a.values(), pos.values(), got);
    k::reference::divide(a.values(), pos.values(), want);
    CHECK(got == want);

    CHECK(k::sum_squares(a.values()) ==
          doctest::Approx(k::reference::sum_squares(a.values())).epsilon(1e-13));
    CHECK(k::dot(a.values(), b.values()) ==
          doctest::Approx(k::reference::dot(a.values(), b.values())).epsilon(1e-11));

    for (std::size_t axis = 0; axis < shape.size(); ++axis) {
      const auto layout = k::axis_layout(shape, axis);
      std::vector<double> s_got(layout.slices()), s_want(layout.slices());
      k::axis_inner(a.values(), b.values(), layout, s_got);
      k::reference::axis_inner(a.values(), b.values(), layout, s_want);
      check_close(s_got, s_want, 1e-12 * static_cast<double>(layout.extent));

      for (std::size_t j = 0; j < s_want.size(); j += 3) s_want[j] = 0.0;
      k::axis_divide(a.values(), s_want, layout, got, kEpsDiv);
      k::reference::axis_divide(a.values(), s_want, layout, want, kEpsDiv);
      CHECK(got == want);
      k::axis_multiply(a.values(), s_want, layout, got);
      k::reference::axis_multiply(a.values(), s_want, layout, want);
      CHECK(got == want);
      k::axis_subtract_scaled(a.values(), b.values(), s_want, layout, got);
      k::reference::axis_subtract_scaled(a.values(), b.values(), s_want, layout, want);
      CHECK(got == want);
    }
  }
}

TEST_CASE("reductions do not depend on the thread count") {
  std::mt19937_64 rng(4);
  const Tensor a = random_normal({300000}, rng), b = random_normal({300000}, rng);
  double one = 0, many = 0;
  {
    k::ThreadCountGuard g(1);
    one = k::dot(a.values(), b.values());
  }
  {
    k::ThreadCountGuard g(3);
    many = k::dot(a.values(), b.values());
  }
  CHECK(one == many);
}

TEST_CASE("axis_divide zeroes slices below the threshold") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const auto layout = k::axis_layout(a.shape(), 0);
  std::vector<double> d{0.0, 2.0}, out(4);
  k::axis_divide(a.values(), d, layout, out, kEpsDiv);
  CHECK(out == std::vector<double>{0, 1, 0, 2});
}

TEST_CASE("gemm matches the naive reference") {
  std::mt19937_64 rng(9);
  const std::size_t dims[][3] = {{1, 1, 1}, {7, 3, 5}, {64, 65, 33}};
  for (const auto& d : dims) {
    const std::size_t m = d[0], kk = d[1], n = d[2];
    const Tensor a = random_normal({m, kk}, rng);
    const Tensor b = random_normal({kk, n}, rng);
    std::vector<double> got(m * n), want(m * n);
    k::gemm(a.data(), b.data(), got.data(), m, kk, n);
    k::reference::gemm(a.data(), b.data(), want.data(), m, kk, n);
    check_close(got, want, 1e-12 * static_cast<double>(kk));
  }
}

TEST_CASE("ThreadCountGuard restores the previous setting") {
  const int before = omp_get_max_threads();
  {
    k::ThreadCountGuard g(before + 2);
    CHECK(omp_get_max_threads() == before + 2);
  }
  CHECK(omp_get_max_threads() == before);
}
