#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/objective.hpp"
#include "warpgrad/tridiagonal.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad {

struct WarpSolution;

/// Gradient of one constraint h_j(z, phi) <= 0 with respect to phi: at most two
/// nonzeros, `coef0` at `knot0` and `coef1` at `knot1` (knot1 = -1 when unused).
struct ConstraintRow {
  Eigen::Index canonical;
  ConstraintRef ref;
  Eigen::Index knot0;
  double coef0;
  Eigen::Index knot1;
  double coef1;
};

ConstraintRow constraint_row(Eigen::Index canonical, Eigen::Index m);

struct ActiveSet {
  std::vector<Eigen::Index> indices;  // kept rows, canonical order
  std::vector<Eigen::Index> pruned;   // near-active rows dropped to restore full row rank
};

/// Keeps rows greedily in canonical order while they stay linearly independent.
/// Constraint rows are oriented edges of a graph on {knots, ground}: slope rows
/// join adjacent knots, box rows join a knot to ground. A set of rows is
/// dependent exactly when its edges contain a cycle, so a union-find gives the
/// rank test without round-off. This also drops the upper half of a bound pair
/// that is active on both sides (s_min = s_max or b_min = b_max).
ActiveSet prune_active_set(const std::vector<Eigen::Index>& candidates, Eigen::Index m);

/// Near-active constraints (|h| <= 1e-6 (1 + |bound|)) after pruning.
ActiveSet detect_active_set(const WarpFunction& w, const ConstraintSet& c);

/// Tridiagonal Hessian of the objective in phi, factorized.
///
/// When the smallest pivot falls below 1e-12 (1 + max|H_ii|) the diagonal is
/// shifted by 1e-8 (1 + max|H_ii|) and `damping` records the shift.
struct HessianFactor {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;
  double damping = 0.0;
  TridiagonalLU lu;

  bool damped() const { return damping > 0.0; }
  Eigen::Index size() const { return diag.size(); }
  Eigen::MatrixXd dense() const;  // including damping
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
};

HessianFactor build_hessian(const GdtwProblem& p, const WarpFunction& w);

/// Equality-constrained Newton/KKT system  [H A^T; A 0]  for a fixed active set.
/// Caches H^{-1} A^T and factorizes the Schur complement S = A H^{-1} A^T.
class KktSystem {
 public:
  KktSystem(const HessianFactor& hessian, std::vector<ConstraintRow> rows);

  Eigen::Index active_count() const { return static_cast<Eigen::Index>(rows_.size()); }
  const std::vector<ConstraintRow>& rows() const { return rows_; }
  const HessianFactor& hessian() const { return *hessian_; }
  const Eigen::MatrixXd& h_inv_at() const { return h_inv_at_; }

  Eigen::VectorXd apply_a(const Eigen::VectorXd& x) const;    // A x
  Eigen::VectorXd apply_at(const Eigen::VectorXd& q) const;   // A^T q
  Eigen::VectorXd solve_schur(const Eigen::VectorXd& r) const;

  /// Reciprocal condition estimate of S (1 when p = 0).
  double schur_rcond() const { return rcond_; }

 private:
  Eigen::RowVectorXd apply_a_rows(Eigen::Index k) const;  // row k of A H^{-1} A^T

  const HessianFactor* hessian_;
  std::vector<ConstraintRow> rows_;
  Eigen::MatrixXd h_inv_at_;
  Eigen::PartialPivLU<Eigen::MatrixXd> schur_;
  double rcond_ = 1.0;
};

/// Adjoint of the solved warp with respect to every input.
struct WarpGradient {
  Eigen::MatrixXd d_x;  // N_x x d
  Eigen::MatrixXd d_y;  // N_y x d
  double d_lambda = 0.0;
  Eigen::VectorXd d_smin, d_smax;  // m-1
  Eigen::VectorXd d_bmin, d_bmax;  // m
  std::vector<std::string> diagnostics;

  /// [vec_rowmajor(d_x), vec_rowmajor(d_y), d_lambda, d_smin, d_smax, d_bmin, d_bmax]
  Eigen::VectorXd flatten() const;
};

/// Offsets of each input block inside the flattened input vector z.
struct InputLayout {
  Eigen::Index x, y, lambda, s_min, s_max, b_min, b_max, total;
};
InputLayout input_layout(const GdtwProblem& p);

/// Multipliers mu >= 0 (in the ideal case) of the kept active rows at the
/// solution, from least squares on grad f + A^T mu = 0.
Eigen::VectorXd active_multipliers(const GdtwProblem& p, const WarpFunction& w,
                                   const ActiveSet& active);

struct VjpOptions {
  double grad_tol = 1e-4;  // kkt residual above this attaches a warning
  double schur_rcond_min = 1e-14;
};

/// v^T D phi(z) evaluated left to right: u = H^{-1} v, q = S^{-1} A u, then
/// r = H^{-1} A^T q - u gives the (X, Y, lambda) block as r^T B and the bounds
/// block is -q^T C. Throws NumericalError when S is numerically singular.
WarpGradient vjp(const Eigen::VectorXd& v, const GdtwProblem& p, const WarpSolution& sol,
                 const VjpOptions& options = {});

/// Full Jacobian D phi(z) (m x n) by dense linear algebra, with B and C
/// materialized column by column from interpolation basis functions. Intended
/// as a reference for small m.
Eigen::MatrixXd jacobian_dense(const GdtwProblem& p, const WarpSolution& sol);

}  // namespace warpgrad
