#pragma once

#include <limits>
#include <span>

#include <Eigen/Dense>

#include "warpgrad/grid.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad::kernels::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Relaxed {
  double cost;
  int arg;
};

// Best predecessor of candidate `to` (knot i+1) among the nodes of knot i.
inline Relaxed relax(std::span<const double> from_values, std::span<const double> from_acc,
                     double to, double dt, double s_lo, double s_hi, double lambda) {
  Relaxed best{kInf, -1};
  const double lo_step = s_lo * dt;
  const double hi_step = s_hi * dt;
  for (std::size_t j = 0; j < from_values.size(); ++j) {
    const double prev = from_acc[j];
    if (prev == kInf) continue;
    const double diff = to - from_values[j];
    if (lo_step - diff > kFeasibilityTol || diff - hi_step > kFeasibilityTol) continue;
    const double u = diff / dt - 1.0;
    const double c = prev + lambda * (u * u) * dt;
    if (c < best.cost) best = {c, static_cast<int>(j)};
  }
  return best;
}

inline double dtw_cell(const Eigen::MatrixXd& acc, Eigen::Index i, Eigen::Index j) {
  if (i == 0 && j == 0) return 0.0;
  double best = kInf;
  if (i > 0 && j > 0) best = acc(i - 1, j - 1);
  if (j > 0) best = std::min(best, acc(i, j - 1));
  if (i > 0) best = std::min(best, acc(i - 1, j));
  return best;
}

}  // namespace warpgrad::kernels::detail
