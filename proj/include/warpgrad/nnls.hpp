#pragma once

#include <Eigen/Dense>

namespace warpgrad {

/// Lawson-Hanson nonnegative least squares: argmin_{x >= 0} |A x - b|_2.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

}  // namespace warpgrad
