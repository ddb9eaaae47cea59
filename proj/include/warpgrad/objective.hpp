#pragma once

#include <vector>

#include <Eigen/Dense>

#include "warpgrad/signal.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad {

/// Near-activity tolerance for a constraint with bound term of magnitude `bound`.
inline double activity_tolerance(double bound) { return 1e-6 * (1.0 + bound); }

/// GDTW problem: align y to the reference x by a warp on fixed knots,
///   minimize  sum_i w_i |x(t_i) - y(phi_i)|^2 + lambda * sum_i dt_i ((phi_{i+1}-phi_i)/dt_i - 1)^2
/// subject to the slope and value bounds in `constraints`. w_i are trapezoid
/// weights (dt_0/2 at the first knot, dt_{m-2}/2 at the last).
class GdtwProblem {
 public:
  GdtwProblem(Signal x, Signal y, double lambda, ConstraintSet constraints);

  const Signal& x() const { return x_; }
  const Signal& y() const { return y_; }
  double lambda() const { return lambda_; }
  const ConstraintSet& constraints() const { return constraints_; }
  const Eigen::VectorXd& knots() const { return constraints_.knots; }
  Eigen::Index knot_count() const { return constraints_.knots.size(); }

  const Eigen::VectorXd& weights() const { return weights_; }
  /// x evaluated at every knot, d x m.
  const Eigen::MatrixXd& reference_at_knots() const { return x_at_knots_; }

  /// Same problem with a different regularization weight.
  GdtwProblem with_lambda(double lambda) const;

 private:
  Signal x_;
  Signal y_;
  double lambda_;
  ConstraintSet constraints_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd x_at_knots_;
};

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& knots);

double signal_loss(const GdtwProblem& p, const WarpFunction& w);
double warp_regulariser(const WarpFunction& w);
double objective(const GdtwProblem& p, const WarpFunction& w);

/// Exact gradient of objective() with respect to the warp values.
Eigen::VectorXd objective_gradient(const GdtwProblem& p, const WarpFunction& w);

/// Canonical indices of constraints with |h_i| <= activity_tolerance(bound_i).
std::vector<Eigen::Index> near_active_constraints(const WarpFunction& w, const ConstraintSet& c);

/// Stationarity residual: min over mu >= 0 on the near-active constraints of
/// |grad f + sum mu_i grad h_i|_inf, with mu from nonnegative least squares.
/// Throws ValidationError when the warp violates a constraint by more than 1e-9.
double kkt_residual(const GdtwProblem& p, const WarpFunction& w);

}  // namespace warpgrad
