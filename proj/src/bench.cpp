#include "mano/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mano/kernels.hpp"
#include "mano/optim.hpp"

namespace mano {

std::uint64_t flops_mano(std::uint64_t m, std::uint64_t n) { return 11 * m * n; }

std::uint64_t flops_newton_schulz(std::uint64_t m, std::uint64_t n, std::uint64_t iterations) {
  if (m > n) std::swap(m, n);
  const std::uint64_t per_iteration =
      2 * m * m * n + 2 * m * m * m + m * m + 2 * m * m * n + 2 * m * n;
  return iterations * per_iteration;
}

std::uint64_t bytes_mano(std::uint64_t m, std::uint64_t n) {
  // theta x2, theta_hat write + 2 reads, momentum, v write + 2 reads, v_hat write.
  return 10 * 8 * m * n;
}

std::uint64_t bytes_newton_schulz(std::uint64_t m, std::uint64_t n, std::uint64_t iterations) {
  if (m > n) std::swap(m, n);
  return iterations * 8 * (3 * m * n + 4 * m * m);
}

double overhead_ratio(OverheadOptimizer opt, std::uint64_t m, std::uint64_t n,
                      std::uint64_t iterations, std::uint64_t batch) {
  if (batch < 1) throw ValueError("overhead_ratio: batch must be at least 1");
  const std::uint64_t work =
      opt == OverheadOptimizer::mano ? flops_mano(m, n) : flops_newton_schulz(m, n, iterations);
  return static_cast<double>(work) / static_cast<double>(6 * m * n * batch);
}

void summarize_timings(std::vector<double> samples_ns, BenchResult& out) {
  if (samples_ns.empty()) throw ValueError("summarize_timings: no samples");
  std::sort(samples_ns.begin(), samples_ns.end());
  const std::size_t n = samples_ns.size();
  out.repetitions = n;
  out.mean_ns = std::accumulate(samples_ns.begin(), samples_ns.end(), 0.0) / static_cast<double>(n);
  out.median_ns = n % 2 ? samples_ns[n / 2] : 0.5 * (samples_ns[n / 2 - 1] + samples_ns[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  out.p95_ns = samples_ns[std::max<std::size_t>(rank, 1) - 1];
}

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
std::vector<double> sample(Fn&& fn, std::size_t reps, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> ns;
  ns.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto start = Clock::now();
    fn();
    const auto stop = Clock::now();
    const double elapsed = std::chrono::duration<double, std::nano>(stop - start).count();
    ns.push_back(std::max(elapsed, 1.0));
  }
  return ns;
}

void check_side(std::size_t m, std::size_t n) {
  if (m == 0 || n == 0 || m > kBenchMaxSide || n > kBenchMaxSide) {
    throw ValueError("benchmark shapes must lie within 1.." + std::to_string(kBenchMaxSide));
  }
}

// Keeps results observable so the optimizer cannot drop the work.
volatile double g_sink = 0.0;

}  // namespace

BenchResult time_mano_transform(std::size_t m, std::size_t n, std::size_t reps,
                                std::size_t warmup, std::uint64_t seed) {
  check_side(m, n);
  std::mt19937_64 rng(seed);
  const Tensor theta = random_normal({m, n}, rng);
  const Tensor momentum = random_normal({m, n}, rng);
  const auto layout = kernels::axis_layout(theta.shape(), 0);
  std::vector<double> norms(layout.slices()), radial(layout.slices());
  Tensor theta_hat({m, n}), tangent({m, n}), tangent_hat({m, n});

  auto transform = [&] {
    kernels::axis_inner(theta.values(), theta.values(), layout, norms);
    for (double& v : norms) v = std::sqrt(v);
    kernels::axis_divide(theta.values(), norms, layout, theta_hat.values_mut(), kEpsDiv);
    kernels::axis_inner(momentum.values(), theta_hat.values(), layout, radial);
    kernels::axis_subtract_scaled(momentum.values(), theta_hat.values(), radial, layout,
                                  tangent.values_mut());
    kernels::axis_inner(tangent.values(), tangent.values(), layout, norms);
    for (double& v : norms) v = std::sqrt(v);
    kernels::axis_divide(tangent.values(), norms, layout, tangent_hat.values_mut(), kEpsDiv);
    g_sink = tangent_hat[0];
  };

  BenchResult r;
  r.op = "mano_transform";
  r.rows = m;
  r.cols = n;
  r.flops = flops_mano(m, n);
  r.bytes = bytes_mano(m, n);
  summarize_timings(sample(transform, reps, warmup), r);
  return r;
}

BenchResult time_newton_schulz(std::size_t m, std::size_t n, std::size_t iterations,
                               std::size_t reps, std::size_t warmup, std::uint64_t seed) {
  check_side(m, n);
  std::mt19937_64 rng(seed);
  // Same stream as time_mano_transform: the momentum matrix is the NS input.
  random_normal({m, n}, rng);
  const Tensor g = random_normal({m, n}, rng);
  auto run = [&] { g_sink = newton_schulz(g, iterations)[0]; };

  BenchResult r;
  r.op = "newton_schulz_t" + std::to_string(iterations);
  r.rows = m;
  r.cols = n;
  r.flops = flops_newton_schulz(m, n, iterations);
  r.bytes = bytes_newton_schulz(m, n, iterations);
  summarize_timings(sample(run, reps, warmup), r);
  return r;
}

std::vector<BenchResult> bench_kernels(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, std::size_t reps,
    std::uint64_t seed) {
  if (reps < kMinBenchRepetitions) {
    throw ValueError("bench_kernels: need at least " + std::to_string(kMinBenchRepetitions) +
                     " repetitions");
  }
  kernels::ThreadCountGuard single_thread(1);
  std::vector<BenchResult> out;
  for (const auto& [m, n] : shapes) {
    out.push_back(time_mano_transform(m, n, reps, kBenchWarmup, seed));
    out.push_back(time_newton_schulz(m, n, 5, reps, kBenchWarmup, seed));
  }
  return out;
}

nlohmann::json to_json_untimed(const BenchResult& r) {
  return nlohmann::json{{"op", r.op},
                        {"rows", r.rows},
                        {"cols", r.cols},
                        {"repetitions", r.repetitions},
                        {"flops", r.flops},
                        {"bytes", r.bytes}};
}

nlohmann::json to_json(const BenchResult& r) {
  nlohmann::json j = to_json_untimed(r);
  j["mean_ns"] = r.mean_ns;
  j["median_ns"] = r.median_ns;
  j["p95_ns"] = r.p95_ns;
  return j;
}

}  // namespace mano
