#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mano/tensor.hpp"

namespace mano {

/// Two normalizations at 3mn each plus a projection at 5mn.
std::uint64_t flops_mano(std::uint64_t m, std::uint64_t n);

/// Quintic Newton-Schulz with m <= n (arguments are swapped otherwise):
/// per iteration 2m^2n for X X^T, 2m^3 for A^2, m^2 for bA + cA^2,
/// 2m^2n for B X and 2mn for the aX recombination.
std::uint64_t flops_newton_schulz(std::uint64_t m, std::uint64_t n, std::uint64_t iterations);

// Memory traffic models, not measurements.
std::uint64_t bytes_mano(std::uint64_t m, std::uint64_t n);
std::uint64_t bytes_newton_schulz(std::uint64_t m, std::uint64_t n, std::uint64_t iterations);

enum class OverheadOptimizer { mano, muon };

/// Optimizer FLOPs over the 6mnB forward/backward baseline of a layer that
/// sees B inputs.
double overhead_ratio(OverheadOptimizer opt, std::uint64_t m, std::uint64_t n,
                      std::uint64_t iterations, std::uint64_t batch);

struct BenchResult {
  std::string op;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t repetitions = 0;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p95_ns = 0.0;
  std::uint64_t flops = 0;
  std::uint64_t bytes = 0;
};

inline constexpr std::size_t kMinBenchRepetitions = 100;
inline constexpr std::size_t kBenchWarmup = 10;
inline constexpr std::size_t kBenchMaxSide = 4096;

/// Times the Mano per-matrix transform (normalize theta, project the momentum,
/// normalize the tangent) with preallocated buffers.
BenchResult time_mano_transform(std::size_t m, std::size_t n, std::size_t reps,
                                std::size_t warmup, std::uint64_t seed);

/// Times newton_schulz(G, iterations).
BenchResult time_newton_schulz(std::size_t m, std::size_t n, std::size_t iterations,
                               std::size_t reps, std::size_t warmup, std::uint64_t seed);

/// Both kernels per shape on identical random inputs, single threaded, with
/// kBenchWarmup discarded repetitions. Requires reps >= 100.
std::vector<BenchResult> bench_kernels(const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                                       std::size_t reps, std::uint64_t seed);

// Summary statistics over raw nanosecond samples (p95 by nearest rank).
void summarize_timings(std::vector<double> samples_ns, BenchResult& out);

nlohmann::json to_json(const BenchResult& r);
// Same object without the wall-clock fields.
nlohmann::json to_json_untimed(const BenchResult& r);

}  // namespace mano
