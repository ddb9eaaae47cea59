#include <algorithm>
#include <cmath>
#include <limits>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/implicit_grad.hpp"

namespace warpgrad {

namespace {

double row_dot(const ConstraintRow& row, const Eigen::VectorXd& x) {
  return row.coef0 * x[row.knot0] + (row.knot1 >= 0 ? row.coef1 * x[row.knot1] : 0.0);
}

std::vector<ConstraintRow> rows_of(const std::vector<Eigen::Index>& working, Eigen::Index m) {
  std::vector<ConstraintRow> rows;
  rows.reserve(working.size());
  for (const Eigen::Index j : working) rows.push_back(constraint_row(j, m));
  return rows;
}

// Projection of -g onto the null space of the working rows.
Eigen::VectorXd projected_descent(const Eigen::VectorXd& g, const std::vector<ConstraintRow>& rows) {
  const Eigen::Index m = g.size();
  if (rows.empty()) return -g;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    a(r, rows[k].knot0) = rows[k].coef0;
    if (rows[k].knot1 >= 0) a(r, rows[k].knot1) = rows[k].coef1;
  }
  const Eigen::VectorXd nu = (a * a.transpose()).ldlt().solve(-(a * g));
  return -(g + a.transpose() * nu);
}

// Component labels of the working rows viewed as edges on {knots, ground};
// a candidate row is dependent on them exactly when it joins one component.
std::vector<Eigen::Index> components(const std::vector<ConstraintRow>& rows, Eigen::Index m) {
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(m + 1));
  for (Eigen::Index i = 0; i <= m; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](Eigen::Index a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    }
    return a;
  };
  for (const ConstraintRow& r : rows) {
    parent[static_cast<std::size_t>(find(r.knot0))] = find(r.knot1 >= 0 ? r.knot1 : m);
  }
  std::vector<Eigen::Index> label(static_cast<std::size_t>(m + 1));
  for (Eigen::Index i = 0; i <= m; ++i) label[static_cast<std::size_t>(i)] = find(i);
  return label;
}

// Other side of the same bound pair (slope lower/upper, box lower/upper).
Eigen::Index partner(Eigen::Index j, Eigen::Index m) {
  const ConstraintRef ref = constraint_ref(j, m);
  switch (ref.kind) {
    case ConstraintKind::slope_lower:
      return canonical_index({ConstraintKind::slope_upper, ref.index}, m);
    case ConstraintKind::slope_upper:
      return canonical_index({ConstraintKind::slope_lower, ref.index}, m);
    case ConstraintKind::box_lower:
      return canonical_index({ConstraintKind::box_upper, ref.index}, m);
    case ConstraintKind::box_upper:
      return canonical_index({ConstraintKind::box_lower, ref.index}, m);
  }
  return j;
}

void clamp_to_range(const ConstraintSet& c, Eigen::VectorXd& phi) {
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = std::clamp(phi[i], c.lower[i], c.upper[i]);
}

}  // namespace

PolishRecord polish_warp(const GdtwProblem& p, Eigen::VectorXd& phi, int max_steps) {
  const ConstraintSet& c = p.constraints();
  const Eigen::Index m = p.knot_count();
  const Eigen::Index n_constraints = constraint_count(m);

  PolishRecord record;
  clamp_to_range(c, phi);
  WarpFunction current(p.knots(), phi);
  double f = objective(p, current);
  record.objective_before = f;

  std::vector<Eigen::Index> working = detect_active_set(current, c).indices;
  Eigen::Index dropped = -1;

  for (int step = 0; step < max_steps; ++step) {
    record.steps = step + 1;
    Eigen::VectorXd g = objective_gradient(p, current);
    const double g_scale = 1.0 + g.lpNorm<Eigen::Infinity>();
    const HessianFactor hessian = build_hessian(p, current);
    const KktSystem kkt(hessian, rows_of(working, m));

    // Put the working rows exactly on their bounds; near-active rows from the
    // grid may sit up to the activity tolerance inside.
    if (kkt.active_count() > 0) {
      Eigen::VectorXd h_w(kkt.active_count());
      const Eigen::VectorXd h_all = constraint_residuals(current, c);
      for (Eigen::Index k = 0; k < kkt.active_count(); ++k) h_w[k] = h_all[working[static_cast<std::size_t>(k)]];
      if (h_w.lpNorm<Eigen::Infinity>() > 0.0) {
        phi -= kkt.h_inv_at() * kkt.solve_schur(h_w);
        clamp_to_range(c, phi);
        current = WarpFunction(p.knots(), phi);
        f = objective(p, current);
        g = objective_gradient(p, current);
      }
    }

    // Equality-constrained Newton step and multipliers on the working set.
    Eigen::VectorXd nu;
    Eigen::VectorXd d = -hessian.solve(g);
    if (kkt.active_count() > 0) {
      nu = kkt.solve_schur(kkt.apply_a(d));
      d = -hessian.solve(g + kkt.apply_at(nu));
    }
    const Eigen::VectorXd reduced = kkt.active_count() > 0 ? Eigen::VectorXd(g + kkt.apply_at(nu)) : g;
    const bool stationary = reduced.lpNorm<Eigen::Infinity>() <= 1e-13 * g_scale ||
                            d.lpNorm<Eigen::Infinity>() <= 1e-14;

    if (stationary) {
      Eigen::Index drop = -1;
      double most_negative = -1e-10 * g_scale;
      for (Eigen::Index k = 0; k < nu.size(); ++k) {
        if (nu[k] < most_negative) {
          most_negative = nu[k];
          drop = k;
        }
      }
      if (drop < 0) {
        record.converged = true;
        break;
      }
      const Eigen::Index j = working[static_cast<std::size_t>(drop)];
      working.erase(working.begin() + drop);
      // A pair active on both sides (equal bounds) flips to the other row.
      const Eigen::Index other = partner(j, m);
      const std::vector<Eigen::Index> near = near_active_constraints(current, c);
      if (std::find(near.begin(), near.end(), other) != near.end()) {
        working.insert(std::upper_bound(working.begin(), working.end(), other), other);
      } else {
        dropped = j;
      }
      continue;
    }

    // Off a constraint with a negative multiplier the projected gradient moves
    // strictly away from it; a Newton step on an indefinite H need not.
    const bool reenters = dropped >= 0 && row_dot(constraint_row(dropped, m), d) > 0.0;
    dropped = -1;
    // Along the working-set manifold g.d equals reduced.d; the latter is free of
    // the round-off in A d.
    double slope = reduced.dot(d);
    if (reenters || !(slope < 0.0)) {
      d = projected_descent(g, kkt.rows());
      slope = -d.squaredNorm();
      if (!(slope < 0.0)) break;
    }

    // Longest feasible step along d.
    const WarpFunction probe(p.knots(), phi);
    const Eigen::VectorXd h = constraint_residuals(probe, c);
    double alpha_max = 1.0;
    Eigen::Index blocking = -1;
    const std::vector<Eigen::Index> label = components(kkt.rows(), m);
    for (Eigen::Index j = 0; j < n_constraints; ++j) {
      if (std::find(working.begin(), working.end(), j) != working.end()) continue;
      const ConstraintRow row = constraint_row(j, m);
      if (label[static_cast<std::size_t>(row.knot0)] ==
          label[static_cast<std::size_t>(row.knot1 >= 0 ? row.knot1 : m)]) {
        continue;
      }
      const double rate = row_dot(row, d);
      if (rate <= 0.0) continue;
      const double alpha = std::max(0.0, -h[j]) / rate;
      if (alpha < alpha_max) {
        alpha_max = alpha;
        blocking = j;
      }
    }

    // Backtrack from the longest feasible step.
    double alpha = alpha_max;
    Eigen::VectorXd trial;
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    // Below this predicted decrease the Armijo test only sees round-off in f.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    for (int k = 0; k < 60 && alpha > 0.0; ++k) {
      trial = phi + alpha * d;
      clamp_to_range(c, trial);
      f_trial = objective(p, WarpFunction(p.knots(), trial));
      if (f_trial <= f + 1e-4 * alpha * slope ||
          (-alpha * slope <= noise && f_trial <= f + noise)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      if (blocking >= 0 && alpha_max <= 1e-14) {
        // Degenerate blocking constraint: take it into the working set.
        std::vector<Eigen::Index> grown = working;
        grown.push_back(blocking);
        ActiveSet kept = prune_active_set(grown, m);
        if (kept.indices.size() > working.size()) {
          working = std::move(kept.indices);
          continue;
        }
      }
      break;  // no decrease left above round-off
    }

    phi = trial;
    current = WarpFunction(p.knots(), phi);
    f = f_trial;
    if (blocking >= 0 && alpha == alpha_max) {
      std::vector<Eigen::Index> grown = working;
      grown.push_back(blocking);
      working = prune_active_set(grown, m).indices;
    }
  }

  if (!record.converged) {
    record.converged = kkt_residual(p, current) <= 1e-9 * (1.0 + objective_gradient(p, current).lpNorm<Eigen::Infinity>());
  }
  record.objective_after = f;
  return record;
}

}  // namespace warpgrad
