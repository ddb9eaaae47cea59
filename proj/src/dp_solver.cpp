#include "warpgrad/dp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "warpgrad/errors.hpp"

namespace warpgrad {

int effective_resolution(const GdtwProblem& p, const SolverOptions& options) {
  if (options.resolution > 0) return options.resolution;
  return std::max(50, static_cast<int>(p.x().size()));
}

namespace {

void uniform_column(double lo, double hi, int resolution, std::vector<double>& out) {
  out.clear();
  if (!(hi > lo)) {
    out.push_back(lo);
    return;
  }
  const double width = hi - lo;
  for (int j = 0; j < resolution; ++j) {
    out.push_back(lo + width * (static_cast<double>(j) / static_cast<double>(resolution - 1)));
  }
  out.back() = hi;
}

}  // namespace

WarpGrid initial_grid(const GdtwProblem& p, int resolution) {
  if (resolution < 2) throw ValidationError("grid resolution M must be >= 2");
  const ConstraintSet& c = p.constraints();
  WarpGrid grid;
  grid.values.reserve(static_cast<std::size_t>(c.knot_count() * resolution));
  std::vector<double> column;
  for (Eigen::Index i = 0; i < c.knot_count(); ++i) {
    uniform_column(c.lower[i], c.upper[i], resolution, column);
    grid.push_column(column);
  }
  return grid;
}

WarpGrid refine_grid(const GdtwProblem& p, const WarpFunction& prev, const WarpGrid& prev_grid,
                     double eta, int resolution) {
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
  if (resolution < 2) throw ValidationError("grid resolution M must be >= 2");
  const ConstraintSet& c = p.constraints();
  if (prev.size() != c.knot_count() ||
      prev_grid.knot_count() != static_cast<std::size_t>(c.knot_count())) {
    throw ValidationError("refine_grid: previous solution does not match the problem");
  }
  WarpGrid grid;
  grid.values.reserve(prev_grid.values.size() + prev_grid.knot_count());
  std::vector<double> column;
  for (Eigen::Index i = 0; i < c.knot_count(); ++i) {
    const auto prev_col = prev_grid.column(static_cast<std::size_t>(i));
    const double prev_width = prev_col.back() - prev_col.front();
    const double center = prev.values()[i];
    const double lo_box = c.lower[i];
    const double hi_box = c.upper[i];
    const double width = eta * prev_width;
    double lo = center - 0.5 * width;
    double hi = center + 0.5 * width;
    if (width >= hi_box - lo_box) {
      lo = lo_box;
      hi = hi_box;
    } else if (lo < lo_box) {
      lo = lo_box;
      hi = lo_box + width;
    } else if (hi > hi_box) {
      hi = hi_box;
      lo = hi_box - width;
    }
    if (!(width > 0.0)) lo = hi = center;
    uniform_column(lo, hi, resolution, column);
    const auto pos = std::lower_bound(column.begin(), column.end(), center);
    if (pos == column.end() || *pos != center) column.insert(pos, center);
    grid.push_column(column);
  }
  return grid;
}

GridPath solve_grid(const GdtwProblem& p, const WarpGrid& g, kernels::Backend backend) {
  const Eigen::Index m = p.knot_count();
  if (g.knot_count() != static_cast<std::size_t>(m)) {
    throw ValidationError("grid has " + std::to_string(g.knot_count()) + " knots, problem has " +
                          std::to_string(m));
  }
  for (std::size_t i = 0; i < g.knot_count(); ++i) {
    if (g.column_size(i) == 0) throw ValidationError("grid column " + std::to_string(i) + " is empty");
  }

  std::vector<double> node_cost(g.values.size());
  std::vector<double> acc(g.values.size());
  std::vector<int> back(g.values.size());
  if (backend == kernels::Backend::serial) {
    kernels::node_costs_serial(p.y(), p.reference_at_knots(), p.weights(), g, node_cost);
    kernels::dp_sweep_serial(g, node_cost, p.constraints(), p.lambda(), acc, back);
  } else {
    kernels::node_costs_omp(p.y(), p.reference_at_knots(), p.weights(), g, node_cost);
    kernels::dp_sweep_omp(g, node_cost, p.constraints(), p.lambda(), acc, back);
  }

  const std::size_t last = g.knot_count() - 1;
  std::size_t best = g.column_size(last);
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.column_size(last); ++k) {
    const double v = acc[g.offsets[last] + k];
    if (v < best_cost) {
      best_cost = v;
      best = k;
    }
  }
  if (best == g.column_size(last)) {
    throw NumericalError("no finite-cost path through the warp grid");
  }

  GridPath path;
  path.cost = best_cost;
  path.choice.assign(g.knot_count(), 0);
  path.values.resize(m);
  std::size_t k = best;
  for (std::size_t i = last + 1; i-- > 0;) {
    path.choice[i] = k;
    path.values[static_cast<Eigen::Index>(i)] = g.values[g.offsets[i] + k];
    if (i > 0) k = static_cast<std::size_t>(back[g.offsets[i] + k]);
  }
  return path;
}

namespace {

IterationRecord record_for(const WarpGrid& g, double grid_objective, double best) {
  const auto m = static_cast<Eigen::Index>(g.knot_count());
  IterationRecord r{Eigen::VectorXd(m), Eigen::VectorXd(m), grid_objective, best};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto col = g.column(static_cast<std::size_t>(i));
    r.grid_lower[i] = col.front();
    r.grid_upper[i] = col.back();
  }
  return r;
}

}  // namespace

WarpSolution solve(const GdtwProblem& p, const SolverOptions& options) {
  if (options.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (!(options.eta > 0.0 && options.eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
  const int resolution = effective_resolution(p, options);
  if (resolution < 2) throw ValidationError("grid resolution M must be >= 2");

  WarpGrid grid = initial_grid(p, resolution);
  GridPath path = solve_grid(p, grid, options.backend);
  WarpFunction best(p.knots(), path.values);
  double best_objective = objective(p, best);
  std::vector<IterationRecord> records{record_for(grid, best_objective, best_objective)};

  for (int it = 1; it < options.iterations; ++it) {
    grid = refine_grid(p, best, grid, options.eta, resolution);
    path = solve_grid(p, grid, options.backend);
    WarpFunction candidate(p.knots(), path.values);
    const double f = objective(p, candidate);
    if (f < best_objective) {
      best = std::move(candidate);
      best_objective = f;
    }
    records.push_back(record_for(grid, f, best_objective));
  }

  std::optional<PolishRecord> polish;
  if (options.polish) {
    Eigen::VectorXd phi = best.values();
    polish = polish_warp(p, phi, options.polish_max_steps);
    best = WarpFunction(p.knots(), std::move(phi));
  }

  const double loss = signal_loss(p, best);
  const double reg = p.lambda() * warp_regulariser(best);
  std::vector<Eigen::Index> active = near_active_constraints(best, p.constraints());
  const double kkt = kkt_residual(p, best);
  const double f = objective(p, best);
  return WarpSolution{std::move(best), f,    loss, reg, std::move(records), polish,
                      std::move(active), kkt};
}

}  // namespace warpgrad
