#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "helpers.hpp"
#include "warpgrad/dp_solver.hpp"
#include "warpgrad/errors.hpp"

using namespace warpgrad;

namespace {

WarpGrid grid_of(const std::vector<std::vector<double>>& columns) {
  WarpGrid g;
  for (const auto& c : columns) g.push_column(c);
  return g;
}

struct Best {
  Eigen::VectorXd values;
  double cost = 1e300;
};

// Enumerates every path; feasibility mirrors the residual test used everywhere
// else (h <= kFeasibilityTol). Ties keep the lexicographically smallest path
// read from the last knot backwards, matching the documented rule.
Best enumerate_paths(const GdtwProblem& p, const WarpGrid& g) {
  const auto m = static_cast<Eigen::Index>(g.knot_count());
  Best best;
  Eigen::VectorXd phi(m);
  auto reversed_less = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = m - 1; i >= 0; --i) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  };
  std::function<void(Eigen::Index)> go = [&](Eigen::Index i) {
    if (i == m) {
      WarpFunction w(p.knots(), phi);
      const auto& c = p.constraints();
      for (Eigen::Index k = 0; k + 1 < m; ++k) {
        const double diff = phi[k + 1] - phi[k];
        if (c.s_min[k] * c.dt(k) - diff > kFeasibilityTol) return;
        if (diff - c.s_max[k] * c.dt(k) > kFeasibilityTol) return;
      }
      const double f = objective(p, w);
      if (f < best.cost - 1e-12 * (1 + f) ||
          (f <= best.cost + 1e-12 * (1 + f) && reversed_less(phi, best.values))) {
        best.cost = f;
        best.values = phi;
      }
      return;
    }
    for (double v : g.column(static_cast<std::size_t>(i))) {
      phi[i] = v;
      go(i + 1);
    }
  };
  go(0);
  return best;
}

}  // namespace

TEST_CASE("default resolution is max(50, n)") {
  std::mt19937_64 rng(1);
  auto small = testing::smooth_problem(rng, 20, 1, 5, 0.1);
  auto large = testing::smooth_problem(rng, 80, 1, 5, 0.1);
  CHECK(effective_resolution(small, {}) == 50);
  CHECK(effective_resolution(large, {}) == 80);
  SolverOptions o;
  o.resolution = 7;
  CHECK(effective_resolution(large, o) == 7);
  CHECK(o.eta == 0.125);
  CHECK(o.iterations == 3);
}

TEST_CASE("solve_grid equals exhaustive enumeration") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 3;
    const int M = 2 + static_cast<int>(u(rng) * 4);
    auto x = testing::smooth_signal(rng, 6, 2);
    auto y = testing::smooth_signal(rng, 6, 2);
    Eigen::VectorXd s_min = Eigen::VectorXd::Zero(m - 1);
    Eigen::VectorXd s_max = Eigen::VectorXd::Constant(m - 1, 1.0 + 3.0 * u(rng));
    auto c = make_constraints(uniform_knots(m), s_min, s_max, Eigen::VectorXd::Zero(m),
                              Eigen::VectorXd::Ones(m), EndpointMode::free);
    GdtwProblem p(x, y, u(rng), c);
    std::vector<std::vector<double>> cols(m);
    for (auto& col : cols) {
      for (int j = 0; j < M; ++j) col.push_back(u(rng));
      std::sort(col.begin(), col.end());
    }
    // Keep at least one feasible path: a constant column value everywhere.
    for (auto& col : cols) col[0] = 0.0;
    auto g = grid_of(cols);
    auto oracle = enumerate_paths(p, g);
    auto path = solve_grid(p, g, kernels::Backend::serial);
    CHECK(path.values == oracle.values);
    CHECK(path.cost == doctest::Approx(oracle.cost).epsilon(1e-12));
  }
}

TEST_CASE("ties go to the smallest candidates") {
  auto flat = Signal::build(std::vector<double>{0, 1}, Eigen::MatrixXd::Ones(2, 1));
  GdtwProblem p(flat, flat, 0.0, default_constraints(uniform_knots(3), EndpointMode::free));
  auto path = solve_grid(p, grid_of({{0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}}));
  CHECK(path.values == Eigen::Vector3d(0.1, 0.1, 0.1));
  CHECK(path.cost == 0.0);
}

TEST_CASE("no finite path is an error") {
  std::mt19937_64 rng(3);
  auto p = testing::smooth_problem(rng, 10, 1, 3, 0.1);
  GdtwProblem free(p.x(), p.y(), 0.1, default_constraints(uniform_knots(3), EndpointMode::free));
  CHECK_THROWS_AS(solve_grid(free, grid_of({{0.9}, {0.5}, {0.1}})), NumericalError);
}

TEST_CASE("identical signals give the identity with active endpoint boxes") {
  std::mt19937_64 rng(5);
  auto x = testing::smooth_signal(rng, 25, 2);
  for (double lambda : {0.0, 0.1, 1.0}) {
    GdtwProblem p(x, x, lambda, default_constraints(uniform_knots(25), EndpointMode::pinned));
    auto sol = solve(p);
    CHECK((sol.warp.values() - p.knots()).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(sol.objective_value < 1e-20);
    const Eigen::Index m = 25;
    std::vector<Eigen::Index> expected{canonical_index({ConstraintKind::box_lower, 0}, m),
                                       canonical_index({ConstraintKind::box_lower, m - 1}, m),
                                       canonical_index({ConstraintKind::box_upper, 0}, m),
                                       canonical_index({ConstraintKind::box_upper, m - 1}, m)};
    CHECK(sol.active_set == expected);
  }
}

TEST_CASE("initial grid spans the feasible range") {
  std::mt19937_64 rng(7);
  auto p = testing::smooth_problem(rng, 10, 1, 6, 0.1);
  auto g = initial_grid(p, 11);
  CHECK(g.column_size(0) == 1);
  CHECK(g.column(0)[0] == 0.0);
  CHECK(g.column(5)[0] == 1.0);
  for (std::size_t i = 1; i < 5; ++i) {
    auto col = g.column(i);
    REQUIRE(col.size() == 11);
    CHECK(col.front() == p.constraints().lower[i]);
    CHECK(col.back() == p.constraints().upper[i]);
    CHECK(std::is_sorted(col.begin(), col.end()));
  }
}

TEST_CASE("refinement shrinks windows by eta and keeps the previous value") {
  std::mt19937_64 rng(9);
  auto base = testing::smooth_problem(rng, 10, 1, 5, 0.1);
  GdtwProblem p(base.x(), base.y(), 0.1, default_constraints(uniform_knots(5), EndpointMode::free));
  const int M = 9;
  auto g0 = initial_grid(p, M);
  Eigen::VectorXd prev(5);
  prev << 0.0, 0.3, 0.5, 0.7, 1.0;  // two knots on the box boundary
  WarpFunction w(p.knots(), prev);
  auto g1 = refine_grid(p, w, g0, 0.125, M);
  auto g2 = refine_grid(p, w, g1, 0.125, M);
  for (std::size_t i = 0; i < 5; ++i) {
    auto c1 = g1.column(i);
    auto c2 = g2.column(i);
    CHECK(c1.back() - c1.front() == doctest::Approx(0.125));
    CHECK(c2.back() - c2.front() == doctest::Approx(0.125 * 0.125));
    CHECK(c1.front() >= 0.0);
    CHECK(c1.back() <= 1.0);
    CHECK(std::find(c1.begin(), c1.end(), prev[i]) != c1.end());
    CHECK(std::find(c2.begin(), c2.end(), prev[i]) != c2.end());
    CHECK(std::is_sorted(c1.begin(), c1.end()));
  }
  // Boundary knots keep their width by shifting inward.
  CHECK(g1.column(0).front() == 0.0);
  CHECK(g1.column(4).back() == 1.0);
}

TEST_CASE("iteration records are monotone and more iterations never hurt") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = testing::smooth_problem(rng, 30, 2, 20, 0.05);
    double last = 1e300;
    for (int iters = 1; iters <= 4; ++iters) {
      SolverOptions o;
      o.iterations = iters;
      o.polish = false;
      auto sol = solve(p, o);
      REQUIRE(sol.iterations.size() == static_cast<std::size_t>(iters));
      for (std::size_t k = 1; k < sol.iterations.size(); ++k) {
        CHECK(sol.iterations[k].objective <= sol.iterations[k - 1].objective);
      }
      CHECK(sol.objective_value == objective(p, sol.warp));
      CHECK(sol.objective_value <= last);
      last = sol.objective_value;
    }
  }
}

TEST_CASE("solutions are feasible and certified") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = testing::smooth_problem(rng, 30, 2, 20, 0.05, Interpolation::cubic_natural);
    auto sol = solve(p);
    CHECK(constraint_residuals(sol.warp, p.constraints()).maxCoeff() <= 1e-9);
    CHECK(sol.objective_value == objective(p, sol.warp));
    CHECK(sol.kkt < 1e-8);
    REQUIRE(sol.polish.has_value());
    CHECK(sol.polish->objective_after <= sol.polish->objective_before);
    CHECK(sol.polish->converged);
    CHECK(sol.kkt == kkt_residual(p, sol.warp));
  }
}
