#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/grid.hpp"
#include "warpgrad/kernels.hpp"
#include "warpgrad/objective.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad {

struct SolverOptions {
  int resolution = 0;  // M; 0 selects max(50, n) with n the sample count of x
  double eta = 0.125;
  int iterations = 3;
  /// Continue from the DP warp with an active-set Newton method on the
  /// continuous problem until first-order conditions hold.
  bool polish = true;
  int polish_max_steps = 50;
  kernels::Backend backend = kernels::Backend::parallel;
};

/// Resolution actually used for a problem.
int effective_resolution(const GdtwProblem& p, const SolverOptions& options);

struct IterationRecord {
  Eigen::VectorXd grid_lower;
  Eigen::VectorXd grid_upper;
  double grid_objective;  // objective of this iteration's DP path
  double objective;       // best objective so far
};

struct PolishRecord {
  int steps = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  bool converged = false;
};

struct WarpSolution {
  WarpFunction warp;
  double objective_value;
  double signal_loss;
  double regularization;  // lambda * R
  std::vector<IterationRecord> iterations;
  std::optional<PolishRecord> polish;
  std::vector<Eigen::Index> active_set;  // near-active canonical indices
  double kkt;
};

struct GridPath {
  Eigen::VectorXd values;
  std::vector<std::size_t> choice;  // index within each knot's column
  double cost;                      // DP path cost
};

/// Globally optimal path through the trellis. Node cost w_i L_i, edge cost
/// lambda dt_i (slope - 1)^2, slope-violating edges excluded. Among equal-cost
/// paths the last knot takes the smallest candidate, and each predecessor the
/// smallest candidate achieving the minimum. Throws NumericalError when no
/// finite path exists.
GridPath solve_grid(const GdtwProblem& p, const WarpGrid& g,
                    kernels::Backend backend = kernels::Backend::parallel);

/// M uniform candidates on each knot's feasible range; single candidate where
/// the range is a point (pinned endpoints).
WarpGrid initial_grid(const GdtwProblem& p, int resolution);

/// Per knot, a window of width eta times the previous window, centred on the
/// previous value, shifted (then clipped) to stay inside the feasible range.
/// M uniform candidates plus the previous value itself.
WarpGrid refine_grid(const GdtwProblem& p, const WarpFunction& prev, const WarpGrid& prev_grid,
                     double eta, int resolution);

WarpSolution solve(const GdtwProblem& p, const SolverOptions& options = {});

/// Active-set Newton refinement of a feasible warp. Monotone in the objective
/// up to round-off; stops at first-order stationarity.
PolishRecord polish_warp(const GdtwProblem& p, Eigen::VectorXd& phi, int max_steps = 50);

}  // namespace warpgrad
