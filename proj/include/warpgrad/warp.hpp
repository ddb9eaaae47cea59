#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace warpgrad {

/// Slope upper bound used when none is given; finite so DP and residual
/// arithmetic stay finite.
inline constexpr double kUnboundedSlope = 1e6;

/// Tolerance on constraint residuals when deciding edge feasibility.
inline constexpr double kFeasibilityTol = 1e-12;

/// Piecewise-linear warp: values[i] = phi(knots[i]).
class WarpFunction {
 public:
  WarpFunction(Eigen::VectorXd knots, Eigen::VectorXd values);

  static WarpFunction identity(const Eigen::VectorXd& knots) { return {knots, knots}; }

  Eigen::Index size() const { return knots_.size(); }
  const Eigen::VectorXd& knots() const { return knots_; }
  const Eigen::VectorXd& values() const { return values_; }

  double operator()(double t) const;

 private:
  Eigen::VectorXd knots_;
  Eigen::VectorXd values_;
};

/// Validates knot times: m >= 2, strictly increasing, knots[0] = 0, knots[m-1] = 1.
void check_knots(const Eigen::VectorXd& knots);

/// Uniformly spaced knots on [0, 1].
Eigen::VectorXd uniform_knots(Eigen::Index m);

enum class EndpointMode { pinned, free };

EndpointMode parse_endpoint_mode(std::string_view name);
std::string_view to_string(EndpointMode mode);

/// Local (slope) and global (value) bounds on a warp.
///
/// `lower` / `upper` are the per-knot feasible ranges after intersecting the
/// user boxes with what the slope bounds allow to be reached from both ends;
/// every value in [lower[i], upper[i]] lies on some feasible warp.
struct ConstraintSet {
  Eigen::VectorXd knots;
  Eigen::VectorXd s_min, s_max;  // per interval, length m-1
  Eigen::VectorXd b_min, b_max;  // per knot, length m
  EndpointMode endpoints = EndpointMode::pinned;
  Eigen::VectorXd lower, upper;

  Eigen::Index knot_count() const { return knots.size(); }
  double dt(Eigen::Index i) const { return knots[i + 1] - knots[i]; }
};

/// Validates and tightens a constraint set. Throws ValidationError on shape or
/// ordering problems and InfeasibleError when no warp satisfies the bounds.
ConstraintSet make_constraints(const Eigen::VectorXd& knots, const Eigen::VectorXd& s_min,
                               const Eigen::VectorXd& s_max, const Eigen::VectorXd& b_min,
                               const Eigen::VectorXd& b_max, EndpointMode endpoints);

/// s in [0, kUnboundedSlope], b in [0, 1], endpoints pinned when requested.
ConstraintSet default_constraints(const Eigen::VectorXd& knots, EndpointMode endpoints);

/// Canonical constraint ordering. With m knots the residual vector holds
///   [0, m-1)          slope-lower  s_min_i dt_i - (phi_{i+1} - phi_i)
///   [m-1, 2(m-1))     slope-upper  (phi_{i+1} - phi_i) - s_max_i dt_i
///   [2(m-1), 3m-2)    box-lower    b_min_k - phi_k
///   [3m-2, 4m-2)      box-upper    phi_k - b_max_k
/// each block ascending in interval / knot index. Feasible means every entry <= 0.
enum class ConstraintKind { slope_lower, slope_upper, box_lower, box_upper };

struct ConstraintRef {
  ConstraintKind kind;
  Eigen::Index index;  // interval or knot
};

Eigen::Index constraint_count(Eigen::Index m);
Eigen::Index canonical_index(ConstraintRef ref, Eigen::Index m);
ConstraintRef constraint_ref(Eigen::Index canonical, Eigen::Index m);

Eigen::VectorXd constraint_residuals(const WarpFunction& w, const ConstraintSet& c);

/// Magnitude of the bound term appearing in a constraint (|s dt| or |b|);
/// scales the near-activity tolerance.
double bound_magnitude(const ConstraintSet& c, ConstraintRef ref);

}  // namespace warpgrad
