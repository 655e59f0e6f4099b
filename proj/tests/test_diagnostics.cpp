#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mano/diagnostics.hpp"
#include "mano/linalg.hpp"
#include "mano/optim.hpp"

using namespace mano;

namespace {

Tensor random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  return polar_factor(random_normal({n, n}, rng));
}

Tensor diag(const std::vector<double>& d) {
  Tensor out = Tensor::zeros({d.size(), d.size()});
  for (std::size_t i = 0; i < d.size(); ++i) out.at(i, i) = d[i];
  return out;
}

// Textbook Pearson correlation of average ranks.
double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

void check_sorted(const std::vector<double>& s) {
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1] >= s[i]);
  for (double v : s) CHECK(v >= 0.0);
}

}  // namespace

TEST_CASE("spectrum report") {
  std::mt19937_64 rng(61);
  SUBCASE("identical momentum and update") {
    const Tensor m = random_normal({6, 4}, rng);
    const auto r = spectrum_report(random_normal({6, 4}, rng), m, m, 7, "w");
    CHECK(r.spearman_rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.sigma_momentum == r.sigma_update);
    CHECK(r.step == 7);
    check_sorted(r.sigma_grad);
    check_sorted(r.sigma_momentum);
  }
  SUBCASE("monotone transform of a (4, 2, 1) spectrum") {
    const Tensor u = random_orthogonal(3, rng), v = random_orthogonal(3, rng);
    const Tensor m = matmul(matmul(u, diag({4, 2, 1})), transpose(v));
    // f(s) = s^2 + 1 per left-singular direction.
    const Tensor up = matmul(matmul(u, diag({17, 5, 2})), transpose(v));
    const auto r = spectrum_report(m, m, up);
    CHECK(r.spearman_rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.sigma_update[0] == doctest::Approx(17).epsilon(1e-10));
  }
  SUBCASE("newton-schulz flattens a spread spectrum") {
    const Tensor u = random_orthogonal(4, rng), v = random_orthogonal(4, rng);
    const Tensor m = matmul(matmul(u, diag({4, 2, 1, 0.5})), transpose(v));
    const auto r = spectrum_report(m, m, newton_schulz(m, 5));
    CHECK(r.sigma_momentum.front() / r.sigma_momentum.back() == doctest::Approx(8.0));
    for (double s : r.sigma_update) {
      CHECK(s >= 0.68);
      CHECK(s <= 1.15);
    }
    CHECK(r.sigma_update.front() / r.sigma_update.back() < 1.7);
  }
  SUBCASE("rho is a diagnostic in range") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto r = spectrum_report(random_normal({5, 5}, rng), random_normal({5, 5}, rng),
                                     random_normal({5, 5}, rng));
      CHECK(r.spearman_rho >= -1.0);
      CHECK(r.spearman_rho <= 1.0);
      check_sorted(r.sigma_update);
    }
  }
  CHECK_THROWS_AS(spectrum_report(Tensor({2, 3}), Tensor({2, 3}), Tensor({3, 2})), ShapeError);
}

TEST_CASE("spearman matches a brute-force rank oracle") {
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> len(2, 10), small(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    std::vector<double> x(n), y(n);
    // Small integer values force ties on many trials.
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 2 ? small(rng) : std::normal_distribution<>()(rng);
      y[i] = small(rng);
    }
    const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                          std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    const double want = constant ? 0.0 : brute_spearman(x, y);
    CHECK(std::abs(spearman_rho(x, y) - want) <= 1e-12);
  }
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
  CHECK(spearman_rho(a, b) == doctest::Approx(-1.0));
  CHECK_THROWS(spearman_rho(a, std::vector<double>{1, 2}));
}

TEST_CASE("greedy matching") {
  const auto m = greedy_match({{0.1, 0.9, 0.0}, {0.8, 0.85, 0.1}, {0.2, 0.3, 0.4}});
  CHECK(m == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("trajectory geodesics") {
  std::mt19937_64 rng(63);
  const Tensor x = random_normal({4, 3}, rng);
  SUBCASE("constant snapshots") {
    const std::vector<Tensor> snaps(5, x);
    for (auto m : {GeodesicManifold::oblique, GeodesicManifold::sphere, GeodesicManifold::stiefel}) {
      const auto t = trajectory_geodesics(snaps, m);
      CHECK(t.distances.size() == 4);
      for (double d : t.distances) CHECK(std::abs(d) <= 1e-12);
    }
  }
  SUBCASE("alternating antipodes on the sphere") {
    const std::vector<Tensor> snaps{x, -x, x, -x};
    const auto t = trajectory_geodesics(snaps, GeodesicManifold::sphere);
    for (double d : t.distances) CHECK(d == doctest::Approx(std::numbers::pi).epsilon(1e-12));
    CHECK(t.mean == doctest::Approx(std::numbers::pi).epsilon(1e-12));
  }
  SUBCASE("reversal symmetry") {
    std::vector<Tensor> snaps;
    for (int i = 0; i < 6; ++i) snaps.push_back(random_normal({4, 3}, rng));
    std::vector<Tensor> rev(snaps.rbegin(), snaps.rend());
    for (auto m : {GeodesicManifold::oblique, GeodesicManifold::sphere, GeodesicManifold::stiefel}) {
      const auto fwd = trajectory_geodesics(snaps, m), bwd = trajectory_geodesics(rev, m);
      for (std::size_t i = 0; i < fwd.distances.size(); ++i) {
        CHECK(fwd.distances[i] ==
              doctest::Approx(bwd.distances[fwd.distances.size() - 1 - i]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("degenerate snapshots are flagged and skipped") {
    Tensor zero_col = x;
    for (std::size_t i = 0; i < 4; ++i) zero_col.at(i, 1) = 0.0;
    const std::vector<Tensor> snaps{x, zero_col, x, x};
    const auto t = trajectory_geodesics(snaps, GeodesicManifold::oblique);
    CHECK(t.flagged == std::vector<std::size_t>{0, 1});
    CHECK(std::isnan(t.distances[0]));
    CHECK(std::isnan(t.distances[1]));
    CHECK(t.mean == 0.0);
  }
  CHECK_THROWS(trajectory_geodesics(std::vector<Tensor>{x}, GeodesicManifold::sphere));
  CHECK_THROWS(trajectory_geodesics(std::vector<Tensor>{x, Tensor({3, 4})}, GeodesicManifold::sphere));
  CHECK(parse_geodesic_manifold("stiefel") == GeodesicManifold::stiefel);
  CHECK_THROWS(parse_geodesic_manifold("torus"));
}

TEST_CASE("spectrum report json round trip") {
  std::mt19937_64 rng(64);
  const Tensor m = random_normal({3, 5}, rng);
  const auto r = spectrum_report(random_normal({3, 5}, rng), m, scaled(m, 2.0), 12, "layer0.weight");
  const auto j = to_json(r);
  for (const char* key : {"step", "layer", "sigma_grad", "sigma_momentum", "sigma_update", "spearman_rho"}) {
    CHECK(j.contains(key));
  }
  const auto back = spectrum_report_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.step == 12);
  CHECK(back.layer == "layer0.weight");
  CHECK(back.sigma_update == r.sigma_update);
  CHECK(back.spearman_rho == r.spearman_rho);
}

TEST_SUITE("empirical") {
  TEST_CASE("random walks: oblique mean distance at most the stiefel one in 90% of trials") {
    int wins = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      std::mt19937_64 rng(7000 + trial);
      std::vector<Tensor> snaps;
      Tensor x = random_normal({16, 8}, rng);
      for (int i = 0; i < 10; ++i) {
        snaps.push_back(x);
        x = x + random_normal({16, 8}, rng, 0.1);
      }
      wins += trajectory_geodesics(snaps, GeodesicManifold::oblique).mean <=
              trajectory_geodesics(snaps, GeodesicManifold::stiefel).mean;
    }
    INFO("oblique <= stiefel in " << wins << " of " << trials << " trials");
    CHECK(wins >= 90);
  }
}
