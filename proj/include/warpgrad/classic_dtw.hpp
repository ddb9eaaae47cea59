#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/kernels.hpp"

namespace warpgrad {

/// Monotone, contiguous path from (0, 0) to (rows-1, cols-1) (zero-based).
struct DiscreteAlignment {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> path;
  double cost = 0.0;
};

/// Squared Euclidean distance between every row of `a` and every row of `b`.
Eigen::MatrixXd pairwise_costs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Classic DTW with steps (1,0), (0,1), (1,1). Backtracking prefers the
/// diagonal predecessor, then (i, j-1), then (i-1, j) on ties.
DiscreteAlignment dtw(const Eigen::MatrixXd& costs,
                      kernels::Backend backend = kernels::Backend::parallel);

}  // namespace warpgrad
