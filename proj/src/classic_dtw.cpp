#include "warpgrad/classic_dtw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "warpgrad/errors.hpp"

namespace warpgrad {

Eigen::MatrixXd pairwise_costs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ValidationError("pairwise_costs: feature dimensions differ (" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
  }
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return c;
}

DiscreteAlignment dtw(const Eigen::MatrixXd& costs, kernels::Backend backend) {
  if (costs.size() == 0) throw ValidationError("dtw: empty cost matrix");
  if (!costs.allFinite()) throw ValidationError("dtw: cost matrix has non-finite entries");

  Eigen::MatrixXd acc;
  if (backend == kernels::Backend::serial) {
    kernels::dtw_accumulate_serial(costs, acc);
  } else {
    kernels::dtw_accumulate_omp(costs, acc);
  }

  DiscreteAlignment out;
  out.cost = acc(costs.rows() - 1, costs.cols() - 1);
  Eigen::Index i = costs.rows() - 1;
  Eigen::Index j = costs.cols() - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1);
      const double left = acc(i, j - 1);
      const double up = acc(i - 1, j);
      if (diag <= left && diag <= up) {
        --i;
        --j;
      } else if (left <= up) {
        --j;
      } else {
        --i;
      }
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

}  // namespace warpgrad
