#include "warpgrad/nnls.hpp"

#include <limits>
#include <vector>

#include "warpgrad/errors.hpp"

namespace warpgrad {

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  const Eigen::Index n = a.cols();
  if (a.rows() != b.size()) throw ValidationError("nnls: shape mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.norm() *
                     static_cast<double>(std::max<Eigen::Index>(a.rows(), n));

  // Least squares restricted to the passive columns.
  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) cols.push_back(j);
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zs[static_cast<Eigen::Index>(k)];
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[best] = true;

    Eigen::VectorXd z;
    for (int inner = 0; inner < max_iterations; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) feasible = false;
      }
      if (feasible) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= tol) {
          passive[j] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j]) x[j] = 0.0;
    }
  }
  return x;
}

}  // namespace warpgrad
