#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mano/tensor.hpp"

namespace mano {

struct SpectrumReport {
  std::uint64_t step = 0;
  std::string layer;
  std::vector<double> sigma_grad;
  std::vector<double> sigma_momentum;
  std::vector<double> sigma_update;
  double spearman_rho = 0.0;
};

/// Singular values of gradient, momentum and update, plus the rank
/// correlation between update and momentum spectra. Each update singular
/// direction is paired with the momentum direction it aligns with best
/// (greedy on |<u, u'>| * |<v, v'>|), and rho is taken over the paired values.
SpectrumReport spectrum_report(const Tensor& grad, const Tensor& momentum, const Tensor& update,
                               std::uint64_t step = 0, std::string layer = {});

/// Spearman correlation with average ranks for ties. Returns 0 when either
/// sequence is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);

// Greedy maximum-weight pairing: result[i] is the column j matched to row i.
std::vector<std::size_t> greedy_match(const std::vector<std::vector<double>>& score);

nlohmann::json to_json(const SpectrumReport& r);
SpectrumReport spectrum_report_from_json(const nlohmann::json& j);

enum class GeodesicManifold { oblique, sphere, stiefel };

std::string_view to_string(GeodesicManifold m);
GeodesicManifold parse_geodesic_manifold(std::string_view name);

struct GeodesicTrajectory {
  std::vector<double> distances;   // one per consecutive pair; NaN when flagged
  std::vector<std::size_t> flagged;  // pair indices skipped as degenerate
  double mean = 0.0;                 // over unflagged pairs
};

/// Distance between each consecutive pair of snapshots. `axis` is the Oblique
/// normalization axis and is ignored for the other manifolds.
GeodesicTrajectory trajectory_geodesics(std::span<const Tensor> snapshots,
                                        GeodesicManifold manifold, std::size_t axis = 0);

}  // namespace mano
