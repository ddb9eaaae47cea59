#include "warpgrad/objective.hpp"

#include <cmath>
#include <string>

#include "warpgrad/errors.hpp"
#include "warpgrad/nnls.hpp"

namespace warpgrad {

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& knots) {
  const Eigen::Index m = knots.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double half = 0.5 * (knots[i + 1] - knots[i]);
    w[i] += half;
    w[i + 1] += half;
  }
  return w;
}

GdtwProblem::GdtwProblem(Signal x, Signal y, double lambda, ConstraintSet constraints)
    : x_(std::move(x)), y_(std::move(y)), lambda_(lambda), constraints_(std::move(constraints)) {
  if (x_.dimension() != y_.dimension()) {
    throw ValidationError("x and y differ in feature dimension (" +
                          std::to_string(x_.dimension()) + " vs " +
                          std::to_string(y_.dimension()) + ")");
  }
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) {
    throw ValidationError("lambda must be finite and >= 0");
  }
  check_knots(constraints_.knots);
  weights_ = trapezoid_weights(constraints_.knots);
  const Eigen::Index m = constraints_.knots.size();
  x_at_knots_.resize(x_.dimension(), m);
  for (Eigen::Index i = 0; i < m; ++i) x_.eval_into(constraints_.knots[i], x_at_knots_.col(i));
}

GdtwProblem GdtwProblem::with_lambda(double lambda) const {
  return GdtwProblem(x_, y_, lambda, constraints_);
}

namespace {

void check_same_knots(const GdtwProblem& p, const WarpFunction& w) {
  if (w.size() != p.knot_count() || w.knots() != p.knots()) {
    throw ValidationError("warp knots differ from the problem knots");
  }
}

// L_i = |x(t_i) - y(phi_i)|^2 for every knot.
Eigen::VectorXd pointwise_losses(const GdtwProblem& p, const WarpFunction& w) {
  const Eigen::Index m = p.knot_count();
  Eigen::VectorXd loss(m);
  Eigen::VectorXd y_val(p.y().dimension());
  for (Eigen::Index i = 0; i < m; ++i) {
    p.y().eval_into(w.values()[i], y_val);
    loss[i] = (p.reference_at_knots().col(i) - y_val).squaredNorm();
  }
  return loss;
}

}  // namespace

double signal_loss(const GdtwProblem& p, const WarpFunction& w) {
  check_same_knots(p, w);
  const Eigen::VectorXd loss = pointwise_losses(p, w);
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < loss.size(); ++i) {
    total += 0.5 * (loss[i + 1] + loss[i]) * (p.knots()[i + 1] - p.knots()[i]);
  }
  return total;
}

double warp_regulariser(const WarpFunction& w) {
  const Eigen::VectorXd& t = w.knots();
  const Eigen::VectorXd& phi = w.values();
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < t.size(); ++i) {
    const double dt = t[i + 1] - t[i];
    const double u = (phi[i + 1] - phi[i]) / dt - 1.0;
    total += u * u * dt;
  }
  return total;
}

double objective(const GdtwProblem& p, const WarpFunction& w) {
  return signal_loss(p, w) + p.lambda() * warp_regulariser(w);
}

Eigen::VectorXd objective_gradient(const GdtwProblem& p, const WarpFunction& w) {
  check_same_knots(p, w);
  const Eigen::Index m = p.knot_count();
  const Eigen::VectorXd& t = p.knots();
  const Eigen::VectorXd& phi = w.values();
  Eigen::VectorXd g(m);
  Eigen::VectorXd y_val(p.y().dimension()), y_der(p.y().dimension());
  for (Eigen::Index i = 0; i < m; ++i) {
    p.y().eval_into(phi[i], y_val);
    p.y().eval_derivative_into(phi[i], y_der);
    g[i] = -2.0 * p.weights()[i] * (p.reference_at_knots().col(i) - y_val).dot(y_der);
  }
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double slope = (phi[i + 1] - phi[i]) / (t[i + 1] - t[i]);
    const double r = 2.0 * p.lambda() * (slope - 1.0);
    g[i + 1] += r;
    g[i] -= r;
  }
  return g;
}

std::vector<Eigen::Index> near_active_constraints(const WarpFunction& w, const ConstraintSet& c) {
  const Eigen::VectorXd h = constraint_residuals(w, c);
  const Eigen::Index m = c.knot_count();
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < h.size(); ++j) {
    if (std::abs(h[j]) <= activity_tolerance(bound_magnitude(c, constraint_ref(j, m)))) {
      active.push_back(j);
    }
  }
  return active;
}

double kkt_residual(const GdtwProblem& p, const WarpFunction& w) {
  const ConstraintSet& c = p.constraints();
  const Eigen::VectorXd h = constraint_residuals(w, c);
  if (h.maxCoeff() > 1e-9) {
    throw ValidationError("kkt_residual: warp violates a constraint by " +
                          std::to_string(h.maxCoeff()));
  }
  const Eigen::VectorXd g = objective_gradient(p, w);
  const std::vector<Eigen::Index> active = near_active_constraints(w, c);
  if (active.empty()) return g.lpNorm<Eigen::Infinity>();

  const Eigen::Index m = p.knot_count();
  Eigen::MatrixXd normals = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(active.size()));
  for (std::size_t col = 0; col < active.size(); ++col) {
    const ConstraintRef ref = constraint_ref(active[col], m);
    const auto j = static_cast<Eigen::Index>(col);
    switch (ref.kind) {
      case ConstraintKind::slope_lower:
        normals(ref.index, j) = 1.0;
        normals(ref.index + 1, j) = -1.0;
        break;
      case ConstraintKind::slope_upper:
        normals(ref.index, j) = -1.0;
        normals(ref.index + 1, j) = 1.0;
        break;
      case ConstraintKind::box_lower:
        normals(ref.index, j) = -1.0;
        break;
      case ConstraintKind::box_upper:
        normals(ref.index, j) = 1.0;
        break;
    }
  }
  const Eigen::VectorXd mu = nnls(normals, -g);
  return (g + normals * mu).lpNorm<Eigen::Infinity>();
}

}  // namespace warpgrad
