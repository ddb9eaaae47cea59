#pragma once

#include <span>

#include <Eigen/Dense>

#include "warpgrad/grid.hpp"
#include "warpgrad/signal.hpp"
#include "warpgrad/warp.hpp"

// Inner loops of the forward solvers. Each kernel has a serial reference and an
// OpenMP variant; both produce bitwise identical output (the parallel loops
// only split independent outer iterations, never a reduction).
namespace warpgrad::kernels {

enum class Backend { serial, parallel };

/// cost[n] = weight_i * |x(t_i) - y(grid value n)|^2 for every grid node n of knot i.
void node_costs_serial(const Signal& y, const Eigen::MatrixXd& x_at_knots,
                       const Eigen::VectorXd& weights, const WarpGrid& grid,
                       std::span<double> cost);
void node_costs_omp(const Signal& y, const Eigen::MatrixXd& x_at_knots,
                    const Eigen::VectorXd& weights, const WarpGrid& grid, std::span<double> cost);

/// Min-cost sweep over the trellis. `acc[n]` receives the cheapest path cost
/// ending at node n (+inf if unreachable); `back[n]` the index, within the
/// previous column, of its predecessor (-1 for the first column or unreachable
/// nodes). Edges violating the slope bounds are skipped; ties keep the smaller
/// predecessor value.
void dp_sweep_serial(const WarpGrid& grid, std::span<const double> node_cost,
                     const ConstraintSet& c, double lambda, std::span<double> acc,
                     std::span<int> back);
void dp_sweep_omp(const WarpGrid& grid, std::span<const double> node_cost,
                  const ConstraintSet& c, double lambda, std::span<double> acc,
                  std::span<int> back);

/// Cumulative DTW cost: acc(i,j) = cost(i,j) + min(acc(i-1,j-1), acc(i-1,j), acc(i,j-1)).
void dtw_accumulate_serial(const Eigen::MatrixXd& cost, Eigen::MatrixXd& acc);
/// Anti-diagonal wavefront.
void dtw_accumulate_omp(const Eigen::MatrixXd& cost, Eigen::MatrixXd& acc);

}  // namespace warpgrad::kernels
