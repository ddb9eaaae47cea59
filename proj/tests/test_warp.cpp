#include <doctest.h>

#include <functional>
#include <random>

#include "helpers.hpp"
#include "warpgrad/errors.hpp"
#include "warpgrad/warp.hpp"

using namespace warpgrad;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXd filled(Eigen::Index n, double v) { return Eigen::VectorXd::Constant(n, v); }

// Depth-first search over a 50-point grid per knot for any warp with all
// residuals <= 0.
bool brute_force_feasible(const Eigen::VectorXd& knots, const Eigen::VectorXd& s_min,
                          const Eigen::VectorXd& s_max, const Eigen::VectorXd& b_min,
                          const Eigen::VectorXd& b_max) {
  const int grid = 50;
  const Eigen::Index m = knots.size();
  auto candidates = [&](Eigen::Index i) {
    std::vector<double> c;
    for (int j = 0; j < grid; ++j) c.push_back(static_cast<double>(j) / (grid - 1));
    c.push_back(b_min[i]);
    c.push_back(b_max[i]);
    return c;
  };
  std::vector<double> phi(m);
  std::function<bool(Eigen::Index)> go = [&](Eigen::Index i) {
    if (i == m) return true;
    for (double v : candidates(i)) {
      if (v < b_min[i] - 1e-12 || v > b_max[i] + 1e-12) continue;
      if (i > 0) {
        const double dt = knots[i] - knots[i - 1];
        const double diff = v - phi[i - 1];
        if (diff < s_min[i - 1] * dt - 1e-12 || diff > s_max[i - 1] * dt + 1e-12) continue;
      }
      phi[i] = v;
      if (go(i + 1)) return true;
    }
    return false;
  };
  return go(0);
}

}  // namespace

TEST_CASE("warp evaluation") {
  WarpFunction half(vec({0, 1}), vec({0, 0.5}));
  CHECK(half(0.5) == 0.25);
  auto id = WarpFunction::identity(uniform_knots(5));
  for (double t : {0.0, 0.1, 0.55, 1.0}) CHECK(id(t) == doctest::Approx(t).epsilon(1e-15));
  WarpFunction w(vec({0, 0.3, 1}), vec({0.1, 0.7, 0.9}));
  CHECK(w(0.3) == 0.7);
  CHECK_THROWS_AS(w(1.5), ValidationError);
}

TEST_CASE("knots are validated") {
  CHECK_THROWS_AS(check_knots(vec({0})), ValidationError);
  CHECK_THROWS_AS(check_knots(vec({0, 0.5, 0.5, 1})), ValidationError);
  CHECK_THROWS_AS(check_knots(vec({0.1, 1})), ValidationError);
  CHECK_THROWS_AS(check_knots(vec({0, 0.9})), ValidationError);
  CHECK_NOTHROW(check_knots(uniform_knots(4)));
}

TEST_CASE("make_constraints feasibility examples") {
  auto k2 = uniform_knots(2);
  auto c = make_constraints(k2, filled(1, 0), filled(1, kUnboundedSlope), vec({0, 1}), vec({0, 1}),
                            EndpointMode::pinned);
  auto h = constraint_residuals(WarpFunction::identity(k2), c);
  CHECK(h.maxCoeff() <= 0.0);

  auto k3 = uniform_knots(3);
  CHECK_THROWS_AS(make_constraints(k3, filled(2, 0), filled(2, 0.5), vec({0, 0, 1}), vec({0, 1, 1}),
                                   EndpointMode::pinned),
                  InfeasibleError);

  auto free = make_constraints(k3, filled(2, 0), filled(2, 10), filled(3, 0), filled(3, 1),
                               EndpointMode::free);
  CHECK(constraint_residuals(WarpFunction(k3, filled(3, 0)), free).maxCoeff() <= 0.0);
}

TEST_CASE("make_constraints rejects malformed bounds") {
  auto k3 = uniform_knots(3);
  CHECK_THROWS_AS(make_constraints(k3, filled(3, 0), filled(2, 2), filled(3, 0), filled(3, 1),
                                   EndpointMode::free),
                  ValidationError);
  CHECK_THROWS_AS(make_constraints(k3, filled(2, 2), filled(2, 1), filled(3, 0), filled(3, 1),
                                   EndpointMode::free),
                  ValidationError);
  CHECK_THROWS_AS(make_constraints(k3, filled(2, 0), filled(2, 2), filled(3, 0.6), filled(3, 0.4),
                                   EndpointMode::free),
                  ValidationError);
  CHECK_THROWS_AS(make_constraints(k3, filled(2, 0), filled(2, 2), filled(3, -0.1), filled(3, 1),
                                   EndpointMode::free),
                  ValidationError);
}

TEST_CASE("residual ordering and values") {
  auto k3 = uniform_knots(3);
  auto c = make_constraints(k3, filled(2, 0), filled(2, 1), vec({0, 0, 1}), vec({0, 1, 1}),
                            EndpointMode::pinned);
  auto h = constraint_residuals(WarpFunction(k3, vec({0, 0.9, 1})), c);
  REQUIRE(h.size() == constraint_count(3));
  CHECK(h.size() == 10);
  const auto up0 = canonical_index({ConstraintKind::slope_upper, 0}, 3);
  CHECK(up0 == 2);
  CHECK(h[up0] == doctest::Approx(0.4));
  CHECK(h[0] == doctest::Approx(-0.9));  // slope-lower, interval 0

  for (Eigen::Index k = 0; k < 10; ++k) CHECK(canonical_index(constraint_ref(k, 3), 3) == k);
  CHECK(constraint_ref(4, 3).kind == ConstraintKind::box_lower);
  CHECK(constraint_ref(7, 3).kind == ConstraintKind::box_upper);
  CHECK(constraint_ref(7, 3).index == 0);
}

TEST_CASE("pinned identity has active endpoint boxes") {
  auto knots = uniform_knots(5);
  auto c = make_constraints(knots, filled(4, 0), filled(4, 2), vec({0, 0, 0, 0, 1}),
                            vec({0, 1, 1, 1, 1}), EndpointMode::pinned);
  auto h = constraint_residuals(WarpFunction::identity(knots), c);
  CHECK(h.maxCoeff() <= 0.0);
  const Eigen::Index m = 5;
  for (auto kind : {ConstraintKind::box_lower, ConstraintKind::box_upper}) {
    CHECK(h[canonical_index({kind, 0}, m)] == 0.0);
    CHECK(h[canonical_index({kind, m - 1}, m)] == 0.0);
  }
}

TEST_CASE("huge free bounds leave every residual strictly negative") {
  auto knots = uniform_knots(4);
  auto c = make_constraints(knots, filled(3, -1e3), filled(3, 1e3), filled(4, 0), filled(4, 1),
                            EndpointMode::free);
  auto h = constraint_residuals(WarpFunction(knots, vec({0.2, 0.4, 0.5, 0.7})), c);
  CHECK(h.maxCoeff() < 0.0);
}

TEST_CASE("tightened ranges hold reachable values only") {
  auto knots = uniform_knots(3);
  auto c = make_constraints(knots, filled(2, 0), filled(2, 1.2), vec({0, 0, 1}), vec({0, 1, 1}),
                            EndpointMode::pinned);
  // phi_1 must reach 1 from phi_1 in dt = 0.5 at slope <= 1.2, and be reachable from 0.
  CHECK(c.lower[1] == doctest::Approx(0.4));
  CHECK(c.upper[1] == doctest::Approx(0.6));
}

TEST_CASE("interval propagation agrees with brute-force search") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 2 + static_cast<int>(u(rng) * 3);
    auto knots = uniform_knots(m);
    Eigen::VectorXd s_min(m - 1), s_max(m - 1), b_min(m), b_max(m);
    for (int i = 0; i < m - 1; ++i) {
      s_min[i] = u(rng) < 0.5 ? 0.0 : 2.0 * u(rng);
      s_max[i] = s_min[i] + 3.0 * u(rng);
    }
    for (int i = 0; i < m; ++i) {
      const double a = u(rng), b = u(rng);
      b_min[i] = std::min(a, b);
      b_max[i] = std::max(a, b);
    }
    const auto mode = u(rng) < 0.3 ? EndpointMode::pinned : EndpointMode::free;
    if (mode == EndpointMode::pinned) {
      b_min[0] = b_max[0] = 0.0;
      b_min[m - 1] = b_max[m - 1] = 1.0;
    }
    const bool brute = brute_force_feasible(knots, s_min, s_max, b_min, b_max);
    bool ok = true;
    try {
      auto c = make_constraints(knots, s_min, s_max, b_min, b_max, mode);
      // Greedy witness through the tightened ranges.
      Eigen::VectorXd phi(m);
      phi[0] = c.lower[0];
      for (int i = 1; i < m; ++i) {
        phi[i] = std::max(c.lower[i], phi[i - 1] + s_min[i - 1] * c.dt(i - 1));
      }
      CHECK(constraint_residuals(WarpFunction(knots, phi), c).maxCoeff() <= 1e-12);
    } catch (const InfeasibleError&) {
      ok = false;
    }
    // The grid can miss a thin feasible set, never invent one.
    if (brute) CHECK(ok);
    if (ok) ++feasible; else ++infeasible;
  }
  CHECK(feasible > 20);
  CHECK(infeasible > 20);
}
