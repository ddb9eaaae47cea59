// Serial reference kernels vs their OpenMP variants.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/kernels.hpp"

using namespace warpgrad;

namespace {

template <typename F>
double min_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

Signal random_signal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(n));
  Eigen::MatrixXd v(n, 2);
  double a = 0.0, b = 0.0;
  for (int i = 0; i < n; ++i) {
    t[static_cast<std::size_t>(i)] = i;
    a = 0.95 * a + 0.3 * normal(rng);
    b = 0.95 * b + 0.3 * normal(rng);
    v(i, 0) = a;
    v(i, 1) = b;
  }
  return Signal::build(t, v);
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
  std::printf("%-14s %8s %8s %12s %12s %8s\n", "kernel", "m", "M", "serial_ms", "omp_ms", "speedup");
  std::mt19937_64 rng(3);
  const int repeats = 5;
  for (const int resolution : {128, 256, 512}) {
    const int m = 64;
    const Signal x = random_signal(rng, resolution);
    const Signal y = random_signal(rng, resolution);
    const GdtwProblem p(x, y, 0.1, default_constraints(uniform_knots(m), EndpointMode::pinned));
    const WarpGrid grid = initial_grid(p, resolution);
    std::vector<double> cost(grid.values.size()), acc(grid.values.size());
    std::vector<int> back(grid.values.size());

    const double ns = min_ms(repeats, [&] {
      kernels::node_costs_serial(p.y(), p.reference_at_knots(), p.weights(), grid, cost);
    });
    const double no = min_ms(repeats, [&] {
      kernels::node_costs_omp(p.y(), p.reference_at_knots(), p.weights(), grid, cost);
    });
    std::printf("%-14s %8d %8d %12.3f %12.3f %8.2f\n", "node_costs", m, resolution, ns, no, ns / no);
    const double ss = min_ms(repeats, [&] {
      kernels::dp_sweep_serial(grid, cost, p.constraints(), p.lambda(), acc, back);
    });
    const double so = min_ms(repeats, [&] {
      kernels::dp_sweep_omp(grid, cost, p.constraints(), p.lambda(), acc, back);
    });
    std::printf("%-14s %8d %8d %12.3f %12.3f %8.2f\n", "dp_sweep", m, resolution, ss, so, ss / so);
  }
  for (const int n : {512, 1024, 2048}) {
    Eigen::MatrixXd costs = Eigen::MatrixXd::Random(n, n).cwiseAbs();
    Eigen::MatrixXd acc;
    const double ds = min_ms(repeats, [&] { kernels::dtw_accumulate_serial(costs, acc); });
    const double dp = min_ms(repeats, [&] { kernels::dtw_accumulate_omp(costs, acc); });
    std::printf("%-14s %8d %8d %12.3f %12.3f %8.2f\n", "dtw_wavefront", n, n, ds, dp, ds / dp);
  }
  return 0;
}
