#include "mano/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mano/linalg.hpp"
#include "mano/manifold.hpp"

namespace mano {

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t r = i; r <= j; ++r) ranks[idx[r]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman_rho: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<std::size_t> greedy_match(const std::vector<std::vector<double>>& score) {
  const std::size_t rows = score.size();
  const std::size_t cols = rows ? score.front().size() : 0;
  struct Cell {
    double value;
    std::size_t i, j;
  };
  std::vector<Cell> cells;
  cells.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) cells.push_back({score[i][j], i, j});
  }
  // Ties resolve toward lower (i, j) so the pairing is deterministic.
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.value > b.value; });
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> match(rows, kUnset);
  std::vector<bool> taken(cols, false);
  std::size_t assigned = 0;
  for (const auto& c : cells) {
    if (assigned == std::min(rows, cols)) break;
    if (match[c.i] != kUnset || taken[c.j]) continue;
    match[c.i] = c.j;
    taken[c.j] = true;
    ++assigned;
  }
  return match;
}

SpectrumReport spectrum_report(const Tensor& grad, const Tensor& momentum, const Tensor& update,
                               std::uint64_t step, std::string layer) {
  require_matrix(grad, "spectrum_report");
  require_same_shape(grad, momentum, "spectrum_report");
  require_same_shape(grad, update, "spectrum_report");

  SpectrumReport r;
  r.step = step;
  r.layer = std::move(layer);
  r.sigma_grad = svd_values(grad);
  const Svd sm = svd(momentum);
  const Svd su = svd(update);
  r.sigma_momentum = sm.singular_values;
  r.sigma_update = su.singular_values;

  const std::size_t rank = r.sigma_update.size();
  std::vector<std::vector<double>> score(rank, std::vector<double>(rank, 0.0));
  for (std::size_t i = 0; i < rank; ++i) {
    for (std::size_t j = 0; j < rank; ++j) {
      double left = 0.0, right = 0.0;
      for (std::size_t a = 0; a < su.u.rows(); ++a) left += su.u.at(a, i) * sm.u.at(a, j);
      for (std::size_t a = 0; a < su.v.rows(); ++a) right += su.v.at(a, i) * sm.v.at(a, j);
      score[i][j] = std::abs(left) * std::abs(right);
    }
  }
  const auto match = greedy_match(score);
  std::vector<double> paired(rank);
  for (std::size_t i = 0; i < rank; ++i) paired[i] = r.sigma_momentum[match[i]];
  r.spearman_rho = spearman_rho(r.sigma_update, paired);
  return r;
}

nlohmann::json to_json(const SpectrumReport& r) {
  return nlohmann::json{{"step", r.step},
                        {"layer", r.layer},
                        {"sigma_grad", r.sigma_grad},
                        {"sigma_momentum", r.sigma_momentum},
                        {"sigma_update", r.sigma_update},
                        {"spearman_rho", r.spearman_rho}};
}

SpectrumReport spectrum_report_from_json(const nlohmann::json& j) {
  SpectrumReport r;
  r.step = j.at("step").get<std::uint64_t>();
  r.layer = j.at("layer").get<std::string>();
  r.sigma_grad = j.at("sigma_grad").get<std::vector<double>>();
  r.sigma_momentum = j.at("sigma_momentum").get<std::vector<double>>();
  r.sigma_update = j.at("sigma_update").get<std::vector<double>>();
  r.spearman_rho = j.at("spearman_rho").get<double>();
  return r;
}

std::string_view to_string(GeodesicManifold m) {
  switch (m) {
    case GeodesicManifold::oblique: return "oblique";
    case GeodesicManifold::sphere: return "sphere";
    case GeodesicManifold::stiefel: return "stiefel";
  }
  return "unknown";
}

GeodesicManifold parse_geodesic_manifold(std::string_view name) {
  for (auto m : {GeodesicManifold::oblique, GeodesicManifold::sphere, GeodesicManifold::stiefel}) {
    if (to_string(m) == name) return m;
  }
  throw ValueError("unknown manifold '" + std::string(name) + "'");
}

GeodesicTrajectory trajectory_geodesics(std::span<const Tensor> snapshots,
                                        GeodesicManifold manifold, std::size_t axis) {
  if (snapshots.size() < 2) throw ValueError("trajectory_geodesics: need at least 2 snapshots");
  for (const auto& s : snapshots) {
    require_matrix(s, "trajectory_geodesics");
    require_same_shape(s, snapshots.front(), "trajectory_geodesics");
  }
  GeodesicTrajectory out;
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < snapshots.size(); ++p) {
    const Tensor& x = snapshots[p];
    const Tensor& y = snapshots[p + 1];
    double d = std::numeric_limits<double>::quiet_NaN();
    try {
      switch (manifold) {
        case GeodesicManifold::oblique: d = geodesic_oblique(x, y, axis); break;
        case GeodesicManifold::sphere: d = geodesic_sphere(x, y); break;
        case GeodesicManifold::stiefel: d = geodesic_stiefel_approx(x, y); break;
      }
    } catch (const DegenerateSliceError&) {
      out.flagged.push_back(p);
    } catch (const ValueError&) {
      out.flagged.push_back(p);
    }
    if (!std::isnan(d)) total += d;
    out.distances.push_back(d);
  }
  const std::size_t good = out.distances.size() - out.flagged.size();
  out.mean = good ? total / static_cast<double>(good) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace mano
