#pragma once

#include <span>

#include <Eigen/Dense>

#include "warpgrad/signal.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad {

/// Mean absolute and root-mean-square deviation between two warps over their
/// common domain. `coverage` is |intersection| / |union| of the two domains.
struct AlignmentError {
  double time_err = 0.0;
  double time_dev = 0.0;
  double coverage = 1.0;
};

/// Exact integrals over [0, 1]; the difference is piecewise linear on the
/// merged knot set and |.| is split at zero crossings.
AlignmentError time_err_dev(const WarpFunction& pred, const WarpFunction& gt);

/// Same closed form for piecewise-linear curves given in arbitrary (original)
/// units. Averages over the intersection of the two domains.
AlignmentError time_err_dev(std::span<const double> pred_knots, std::span<const double> pred_values,
                            std::span<const double> gt_knots, std::span<const double> gt_values);

/// Gradient of time_err with respect to pred.values(). Segments where the
/// difference is identically zero contribute 0.
Eigen::VectorXd time_err_gradient(const WarpFunction& pred, const WarpFunction& gt);

/// Gradient of time_dev with respect to pred.values() (0 when time_dev = 0).
Eigen::VectorXd time_dev_gradient(const WarpFunction& pred, const WarpFunction& gt);

/// Per-knot geometric errors e_i = |ref_geo(phi_i) - query_i|^2 and their
/// hard max, mean and log-sum-exp smooth max at temperature `tau`.
struct PathError {
  Eigen::VectorXd errors;
  double max = 0.0;
  Eigen::Index argmax = 0;  // first maximizer
  double mean = 0.0;
  double smooth_max = 0.0;
  double tau = 0.0;
};

/// Temperature used when none is given: 1% of the mean error (1e-12 if zero).
double default_temperature(const Eigen::VectorXd& errors);

/// `query_geo` holds one row per warp knot. `tau` <= 0 selects default_temperature.
PathError max_path_error(const Signal& ref_geo, const WarpFunction& pred,
                         const Eigen::MatrixXd& query_geo, double tau = 0.0);

enum class PathReduction { hard_max, mean, smooth_max };

/// Gradient with respect to pred.values(). The hard max uses the first argmax;
/// the smooth max treats `tau` as a constant (resolved as in max_path_error).
Eigen::VectorXd max_path_error_gradient(const Signal& ref_geo, const WarpFunction& pred,
                                        const Eigen::MatrixXd& query_geo, PathReduction reduction,
                                        double tau = 0.0);

}  // namespace warpgrad
