// Serial reference kernels against the OpenMP versions, plus the Mano
// transform against Newton-Schulz.
//
//   kernel_bench [side ...]    default sides: 256 1024 2048

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "mano/bench.hpp"
#include "mano/kernels.hpp"

namespace k = mano::kernels;

namespace {

double median_us(const std::function<void()>& fn, std::size_t reps) {
  for (int i = 0; i < 3; ++i) fn();
  std::vector<double> ns;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    ns.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count());
  }
  mano::BenchResult res;
  mano::summarize_timings(ns, res);
  return res.median_ns / 1e3;
}

void row(const char* name, std::size_t side, double serial, double parallel) {
  std::printf("%-22s %6zu %12.1f %12.1f %8.2fx\n", name, side, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> sides;
  for (int i = 1; i < argc; ++i) sides.push_back(std::strtoul(argv[i], nullptr, 10));
  if (sides.empty()) sides = {256, 1024, 2048};

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %6s %12s %12s %9s\n", "kernel", "side", "serial_us", "parallel_us", "speedup");
  std::mt19937_64 rng(7);
  for (const std::size_t side : sides) {
    const mano::Tensor a = mano::random_normal({side, side}, rng);
    const mano::Tensor b = mano::random_normal({side, side}, rng);
    const auto layout = k::axis_layout(a.shape(), 0);
    std::vector<double> out(a.size()), slices(layout.slices(), 1.5);
    const std::size_t reps = side >= 2048 ? 10 : 50;

    row("multiply", side, median_us([&] { k::reference::multiply(a.values(), b.values(), out); }, reps),
        median_us([&] { k::multiply(a.values(), b.values(), out); }, reps));
    volatile double sink = 0;
    row("sum_squares", side, median_us([&] { sink = k::reference::sum_squares(a.values()); }, reps),
        median_us([&] { sink = k::sum_squares(a.values()); }, reps));
    row("axis_inner", side,
        median_us([&] { k::reference::axis_inner(a.values(), b.values(), layout, slices); }, reps),
        median_us([&] { k::axis_inner(a.values(), b.values(), layout, slices); }, reps));
    row("axis_divide", side,
        median_us([&] { k::reference::axis_divide(a.values(), slices, layout, out); }, reps),
        median_us([&] { k::axis_divide(a.values(), slices, layout, out); }, reps));
    row("axis_subtract_scaled", side,
        median_us([&] { k::reference::axis_subtract_scaled(a.values(), b.values(), slices, layout, out); }, reps),
        median_us([&] { k::axis_subtract_scaled(a.values(), b.values(), slices, layout, out); }, reps));
    if (side <= 512) {
      row("gemm", side,
          median_us([&] { k::reference::gemm(a.data(), b.data(), out.data(), side, side, side); }, 3),
          median_us([&] { k::gemm(a.data(), b.data(), out.data(), side, side, side); }, 3));
    }
    (void)sink;
  }

  std::printf("\n%-22s %6s %12s %12s %9s\n", "transform", "side", "ns_t5_us", "mano_us", "ratio");
  for (const std::size_t side : sides) {
    const std::size_t reps = side >= 2048 ? 3 : 20;
    const auto mano = mano::time_mano_transform(side, side, 20, 3, 1);
    const auto ns = mano::time_newton_schulz(side, side, 5, reps, 1, 1);
    row("mano vs newton_schulz", side, ns.median_ns / 1e3, mano.median_ns / 1e3);
  }
  return 0;
}
