#include "warpgrad/warp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "warpgrad/errors.hpp"

namespace warpgrad {

void check_knots(const Eigen::VectorXd& knots) {
  const Eigen::Index m = knots.size();
  if (m < 2) throw ValidationError("a warp needs at least 2 knots");
  if (knots[0] != 0.0 || knots[m - 1] != 1.0) {
    throw ValidationError("warp knots must span [0, 1]");
  }
  for (Eigen::Index i = 1; i < m; ++i) {
    if (!(knots[i] > knots[i - 1])) {
      throw ValidationError("warp knots must be strictly increasing (index " + std::to_string(i) +
                            ")");
    }
  }
}

Eigen::VectorXd uniform_knots(Eigen::Index m) {
  if (m < 2) throw ValidationError("a warp needs at least 2 knots");
  Eigen::VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) t[i] = static_cast<double>(i) / static_cast<double>(m - 1);
  return t;
}

WarpFunction::WarpFunction(Eigen::VectorXd knots, Eigen::VectorXd values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  check_knots(knots_);
  if (values_.size() != knots_.size()) {
    throw ValidationError("warp values and knots differ in length");
  }
  if (!values_.allFinite()) throw ValidationError("warp values must be finite");
}

double WarpFunction::operator()(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("warp evaluated outside [0, 1] at t = " + std::to_string(t));
  }
  const auto* begin = knots_.data();
  const auto* end = begin + knots_.size();
  const auto hi = std::upper_bound(begin, end, t);
  Eigen::Index k = std::max<Eigen::Index>(hi - begin - 1, 0);
  k = std::min<Eigen::Index>(k, knots_.size() - 2);
  if (t == knots_[k]) return values_[k];
  if (t == knots_[k + 1]) return values_[k + 1];
  const double b = (t - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return (1.0 - b) * values_[k] + b * values_[k + 1];
}

EndpointMode parse_endpoint_mode(std::string_view name) {
  if (name == "pinned") return EndpointMode::pinned;
  if (name == "free" || name == "subsequence") return EndpointMode::free;
  throw ValidationError("unknown endpoint mode: " + std::string(name));
}

std::string_view to_string(EndpointMode mode) {
  return mode == EndpointMode::pinned ? "pinned" : "free";
}

namespace {

bool nearly_empty(double lo, double hi) {
  return lo - hi <= 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
}

}  // namespace

ConstraintSet make_constraints(const Eigen::VectorXd& knots, const Eigen::VectorXd& s_min,
                               const Eigen::VectorXd& s_max, const Eigen::VectorXd& b_min,
                               const Eigen::VectorXd& b_max, EndpointMode endpoints) {
  check_knots(knots);
  const Eigen::Index m = knots.size();
  if (s_min.size() != m - 1 || s_max.size() != m - 1) {
    throw ValidationError("slope bounds need m-1 = " + std::to_string(m - 1) + " entries");
  }
  if (b_min.size() != m || b_max.size() != m) {
    throw ValidationError("value bounds need m = " + std::to_string(m) + " entries");
  }
  if (!s_min.allFinite() || !s_max.allFinite() || !b_min.allFinite() || !b_max.allFinite()) {
    throw ValidationError("constraint bounds must be finite");
  }
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    if (s_min[i] > s_max[i]) {
      throw ValidationError("inverted slope bounds on interval " + std::to_string(i));
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b_min[i] > b_max[i]) throw ValidationError("inverted value bounds at knot " + std::to_string(i));
    if (b_min[i] < 0.0 || b_max[i] > 1.0) {
      throw ValidationError("value bounds must lie in [0, 1] (knot " + std::to_string(i) + ")");
    }
  }
  if (endpoints == EndpointMode::pinned &&
      (b_min[0] != 0.0 || b_max[0] != 0.0 || b_min[m - 1] != 1.0 || b_max[m - 1] != 1.0)) {
    throw ValidationError("pinned endpoints require b[0] = [0, 0] and b[m-1] = [1, 1]");
  }

  ConstraintSet c{knots, s_min, s_max, b_min, b_max, endpoints, b_min, b_max};

  // Forward: what is reachable from the left end.
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double dt = c.dt(i);
    double lo = std::max(b_min[i + 1], c.lower[i] + dt * s_min[i]);
    double hi = std::min(b_max[i + 1], c.upper[i] + dt * s_max[i]);
    if (lo > hi) {
      if (!nearly_empty(lo, hi)) {
        throw InfeasibleError("constraints are infeasible: no warp reaches knot " +
                              std::to_string(i + 1));
      }
      lo = hi = std::clamp(0.5 * (lo + hi), b_min[i + 1], b_max[i + 1]);
    }
    c.lower[i + 1] = lo;
    c.upper[i + 1] = hi;
  }
  // Backward: what can still reach the right end.
  for (Eigen::Index i = m - 1; i-- > 0;) {
    const double dt = c.dt(i);
    double lo = std::max(c.lower[i], c.lower[i + 1] - dt * s_max[i]);
    double hi = std::min(c.upper[i], c.upper[i + 1] - dt * s_min[i]);
    if (lo > hi) {
      if (!nearly_empty(lo, hi)) {
        throw InfeasibleError("constraints are infeasible at knot " + std::to_string(i));
      }
      lo = hi = std::clamp(0.5 * (lo + hi), c.lower[i], c.upper[i]);
    }
    c.lower[i] = lo;
    c.upper[i] = hi;
  }
  return c;
}

ConstraintSet default_constraints(const Eigen::VectorXd& knots, EndpointMode endpoints) {
  const Eigen::Index m = knots.size();
  if (m < 2) throw ValidationError("a warp needs at least 2 knots");
  Eigen::VectorXd b_min = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd b_max = Eigen::VectorXd::Ones(m);
  if (endpoints == EndpointMode::pinned) {
    b_max[0] = 0.0;
    b_min[m - 1] = 1.0;
  }
  return make_constraints(knots, Eigen::VectorXd::Zero(m - 1),
                          Eigen::VectorXd::Constant(m - 1, kUnboundedSlope), b_min, b_max,
                          endpoints);
}

Eigen::Index constraint_count(Eigen::Index m) { return 2 * (m - 1) + 2 * m; }

Eigen::Index canonical_index(ConstraintRef ref, Eigen::Index m) {
  switch (ref.kind) {
    case ConstraintKind::slope_lower:
      return ref.index;
    case ConstraintKind::slope_upper:
      return (m - 1) + ref.index;
    case ConstraintKind::box_lower:
      return 2 * (m - 1) + ref.index;
    case ConstraintKind::box_upper:
      return 2 * (m - 1) + m + ref.index;
  }
  return -1;
}

ConstraintRef constraint_ref(Eigen::Index canonical, Eigen::Index m) {
  if (canonical < 0 || canonical >= constraint_count(m)) {
    throw ValidationError("constraint index out of range");
  }
  if (canonical < m - 1) return {ConstraintKind::slope_lower, canonical};
  if (canonical < 2 * (m - 1)) return {ConstraintKind::slope_upper, canonical - (m - 1)};
  if (canonical < 2 * (m - 1) + m) return {ConstraintKind::box_lower, canonical - 2 * (m - 1)};
  return {ConstraintKind::box_upper, canonical - 2 * (m - 1) - m};
}

Eigen::VectorXd constraint_residuals(const WarpFunction& w, const ConstraintSet& c) {
  const Eigen::Index m = c.knot_count();
  if (w.size() != m) throw ValidationError("warp and constraint set differ in knot count");
  const Eigen::VectorXd& phi = w.values();
  Eigen::VectorXd r(constraint_count(m));
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double diff = phi[i + 1] - phi[i];
    const double dt = c.dt(i);
    r[i] = c.s_min[i] * dt - diff;
    r[(m - 1) + i] = diff - c.s_max[i] * dt;
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    r[2 * (m - 1) + k] = c.b_min[k] - phi[k];
    r[2 * (m - 1) + m + k] = phi[k] - c.b_max[k];
  }
  return r;
}

double bound_magnitude(const ConstraintSet& c, ConstraintRef ref) {
  switch (ref.kind) {
    case ConstraintKind::slope_lower:
      return std::abs(c.s_min[ref.index] * c.dt(ref.index));
    case ConstraintKind::slope_upper:
      return std::abs(c.s_max[ref.index] * c.dt(ref.index));
    case ConstraintKind::box_lower:
      return std::abs(c.b_min[ref.index]);
    case ConstraintKind::box_upper:
      return std::abs(c.b_max[ref.index]);
  }
  return 0.0;
}

}  // namespace warpgrad
