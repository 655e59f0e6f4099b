#include <doctest.h>

#include <cmath>
#include <limits>

#include "mano/manifold.hpp"
#include "mano/tensor.hpp"
#include "oracles.hpp"

using namespace mano;

namespace {

std::vector<double> as_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("constructor enforces shape product and finiteness") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()}), ValueError);
  CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}), ValueError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.at(1, 2) == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
}

TEST_CASE("hadamard") {
  CHECK(hadamard(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{1, 1}, {1, 1}})) ==
        Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(hadamard(Tensor::matrix({{2, 0}, {0, 2}}), Tensor::matrix({{0, 5}, {7, 0}})) ==
        Tensor::matrix({{0, 0}, {0, 0}}));
  CHECK(hadamard(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{2, 3}, {4, 5}})) ==
        Tensor::matrix({{2, 6}, {12, 20}}));
  CHECK_THROWS_AS(hadamard(Tensor({2, 2}), Tensor({2, 3})), ShapeError);
}

TEST_CASE("eltwise_div") {
  CHECK(eltwise_div(Tensor::matrix({{4, 9}}), Tensor::matrix({{2, 3}})) == Tensor::matrix({{2, 3}}));
  CHECK(eltwise_div(Tensor::matrix({{0, 0}}), Tensor::matrix({{5, 7}})) == Tensor::matrix({{0, 0}}));
  CHECK_THROWS_AS(eltwise_div(Tensor::matrix({{1}}), Tensor::matrix({{0}})), DivisionByZeroError);
  try {
    eltwise_div(Tensor::matrix({{1, 1, 1}}), Tensor::matrix({{1, 1e-31, 2}}));
    FAIL("expected division error");
  } catch (const DivisionByZeroError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("dim_inner and dim_norm follow the reduced-axis convention") {
  const auto a = Tensor::matrix({{1, 2}, {3, 4}});
  const auto ones = Tensor::matrix({{1, 1}, {1, 1}});
  CHECK(dim_inner(Tensor::identity(2), Tensor::identity(2), 0).values == std::vector<double>{1, 1});
  CHECK(dim_inner(a, ones, 0).values == std::vector<double>{4, 6});
  CHECK(dim_inner(a, ones, 1).values == std::vector<double>{3, 7});
  CHECK(dim_norm(Tensor::matrix({{3, 0}, {4, 0}}), 0).values == std::vector<double>{5, 0});
  CHECK(dim_norm(Tensor::identity(3), 0).values == std::vector<double>{1, 1, 1});
  CHECK(dim_norm(Tensor::matrix({{3, 4}}), 1).values == std::vector<double>{5});
  CHECK(dim_norm(Tensor({3, 5}), 0).size() == 5);
  CHECK(dim_norm(Tensor({3, 5}), 1).size() == 3);
  CHECK_THROWS_AS(dim_norm(a, 2), AxisError);
  CHECK_THROWS_AS(dim_inner(a, Tensor({2, 3}), 0), ShapeError);
}

TEST_CASE("dim_inner matches the scalar-loop oracle on order-3 tensors") {
  std::mt19937_64 rng(11);
  const Shape shape{3, 4, 5};
  for (std::size_t k = 0; k < 3; ++k) {
    const Tensor a = random_normal(shape, rng), b = random_normal(shape, rng);
    const auto got = dim_inner(a, b, k);
    const auto want = oracle::slice_dot(as_vec(a), as_vec(b), shape, k);
    REQUIRE(got.size() == want.size());
    CHECK(got.axis == k);
    for (std::size_t j = 0; j < want.size(); ++j) CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-13));
  }
}

TEST_CASE("dim_norm squared equals dim_inner(A, A)") {
  std::mt19937_64 rng(3);
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const Tensor a = random_normal({1 + trial % 7, 1 + trial % 5}, rng);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto n = dim_norm(a, k), ip = dim_inner(a, a, k);
      for (std::size_t j = 0; j < n.size(); ++j) {
        CHECK(std::abs(n[j] * n[j] - ip[j]) <= 1e-12 * ip[j]);
      }
    }
  }
}

TEST_CASE("matmul") {
  CHECK(matmul(Tensor::identity(2), Tensor::matrix({{1, 2}, {3, 4}})) == Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})) == Tensor::matrix({{11}}));
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 2})), ShapeError);
  CHECK_THROWS_AS(matmul(Tensor({2}), Tensor({2, 2})), ShapeError);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_normal({5, 5}, rng), b = random_normal({5, 5}, rng),
                 c = random_normal({5, 5}, rng);
    const Tensor left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
    CHECK(max_abs_diff(left, right) <= 1e-10 * frobenius_norm(left));
  }
}

TEST_CASE("svd_values") {
  CHECK(svd_values(Tensor::matrix({{3, 0}, {0, 1}})) == std::vector<double>{3, 1});
  CHECK(svd_values(Tensor::matrix({{0, 0}, {0, 0}})) == std::vector<double>{0, 0});
  const auto s = svd_values(Tensor::matrix({{1, 1}, {0, 1}}));
  CHECK(s[0] * s[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s[0] * s[0] + s[1] * s[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-12));
  CHECK_THROWS_AS(svd_values(Tensor({3})), ShapeError);
}

TEST_CASE("singular values of A are the square roots of those of A^T A") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_normal({8, 8}, rng);
    const auto s = svd_values(a);
    const auto s2 = svd_values(matmul(transpose(a), a));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(std::sqrt(s2[i]) - s[i]) <= 1e-8 * s[0]);
  }
}

TEST_CASE("rms") {
  CHECK(rms(Tensor::filled({3, 5}, 1.0)) == 1.0);
  CHECK(rms(Tensor::matrix({{3, 4}, {0, 0}})) == 2.5);
  std::mt19937_64 rng(1);
  const Tensor cols = oblique_normalize(random_normal({4, 7}, rng), 0);
  CHECK(std::abs(rms(cols) - 0.5) <= 1e-15);
}

TEST_CASE("column-normalized matrices have rms sqrt(1/m)") {
  std::mt19937_64 rng(2);
  for (std::size_t m = 1; m <= 9; ++m) {
    for (std::size_t n = 1; n <= 9; n += 2) {
      const Tensor a = random_normal({m, n}, rng);
      const Tensor normalized = broadcast_div(a, dim_norm(a, 0));
      CHECK(std::abs(rms(normalized) - std::sqrt(1.0 / static_cast<double>(m))) <= 1e-12);
    }
  }
}
