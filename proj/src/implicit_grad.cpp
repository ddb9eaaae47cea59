#include "warpgrad/implicit_grad.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <string>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/errors.hpp"

namespace warpgrad {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

ConstraintRow constraint_row(Eigen::Index canonical, Eigen::Index m) {
  const ConstraintRef ref = constraint_ref(canonical, m);
  switch (ref.kind) {
    case ConstraintKind::slope_lower:
      return {canonical, ref, ref.index, 1.0, ref.index + 1, -1.0};
    case ConstraintKind::slope_upper:
      return {canonical, ref, ref.index, -1.0, ref.index + 1, 1.0};
    case ConstraintKind::box_lower:
      return {canonical, ref, ref.index, -1.0, -1, 0.0};
    case ConstraintKind::box_upper:
      return {canonical, ref, ref.index, 1.0, -1, 0.0};
  }
  return {canonical, ref, -1, 0.0, -1, 0.0};
}

namespace {

struct DisjointSet {
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

ActiveSet prune_active_set(const std::vector<Eigen::Index>& candidates, Eigen::Index m) {
  std::vector<Eigen::Index> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto ground = static_cast<std::size_t>(m);
  DisjointSet components(ground + 1);
  ActiveSet out;
  for (const Eigen::Index j : sorted) {
    const ConstraintRow row = constraint_row(j, m);
    const auto a = static_cast<std::size_t>(row.knot0);
    const std::size_t b = row.knot1 >= 0 ? static_cast<std::size_t>(row.knot1) : ground;
    if (components.unite(a, b)) {
      out.indices.push_back(j);
    } else {
      out.pruned.push_back(j);
    }
  }
  return out;
}

ActiveSet detect_active_set(const WarpFunction& w, const ConstraintSet& c) {
  return prune_active_set(near_active_constraints(w, c), c.knot_count());
}

Eigen::MatrixXd HessianFactor::dense() const {
  const Eigen::Index m = diag.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) h(i, i) = diag[i] + damping;
  for (Eigen::Index i = 0; i + 1 < m; ++i) h(i, i + 1) = h(i + 1, i) = off[i];
  return h;
}

Eigen::VectorXd HessianFactor::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = rhs;
  lu.solve_in_place(std::span<double>(x.data(), static_cast<std::size_t>(x.size())));
  return x;
}

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

HessianFactor build_hessian(const GdtwProblem& p, const WarpFunction& w) {
  const Eigen::Index m = p.knot_count();
  const Eigen::VectorXd& t = p.knots();
  const Eigen::VectorXd& phi = w.values();
  const Signal& y = p.y();
  HessianFactor h;
  h.diag = Eigen::VectorXd::Zero(m);
  h.off = Eigen::VectorXd::Zero(m - 1);
  Eigen::VectorXd y_val(y.dimension()), y_der(y.dimension()), y_der2(y.dimension());
  for (Eigen::Index i = 0; i < m; ++i) {
    y.eval_into(phi[i], y_val);
    y.eval_derivative_into(phi[i], y_der);
    y.eval_second_derivative_into(phi[i], y_der2);
    const Eigen::VectorXd residual = p.reference_at_knots().col(i) - y_val;
    h.diag[i] = 2.0 * p.weights()[i] * (y_der.squaredNorm() - residual.dot(y_der2));
  }
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    const double k = 2.0 * p.lambda() / (t[i + 1] - t[i]);
    h.diag[i] += k;
    h.diag[i + 1] += k;
    h.off[i] = -k;
  }

  const double scale = 1.0 + h.diag.cwiseAbs().maxCoeff();
  h.lu = TridiagonalLU(as_span(h.off), as_span(h.diag), as_span(h.off));
  if (!(h.lu.min_abs_pivot() >= 1e-12 * scale)) {
    h.damping = 1e-8 * scale;
    const Eigen::VectorXd shifted = h.diag.array() + h.damping;
    h.lu = TridiagonalLU(as_span(h.off), as_span(shifted), as_span(h.off));
  }
  return h;
}

KktSystem::KktSystem(const HessianFactor& hessian, std::vector<ConstraintRow> rows)
    : hessian_(&hessian), rows_(std::move(rows)) {
  const Eigen::Index m = hessian.size();
  const auto p = static_cast<Eigen::Index>(rows_.size());
  h_inv_at_ = Eigen::MatrixXd::Zero(m, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const ConstraintRow& row = rows_[static_cast<std::size_t>(k)];
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m);
    col[row.knot0] = row.coef0;
    if (row.knot1 >= 0) col[row.knot1] = row.coef1;
    h_inv_at_.col(k) = hessian.solve(col);
  }
  if (p > 0) {
    Eigen::MatrixXd schur(p, p);
    for (Eigen::Index k = 0; k < p; ++k) schur.row(k) = apply_a_rows(k);
    schur = 0.5 * (schur + schur.transpose()).eval();
    schur_.compute(schur);
    rcond_ = schur_.rcond();
  }
}

Eigen::RowVectorXd KktSystem::apply_a_rows(Eigen::Index k) const {
  const ConstraintRow& row = rows_[static_cast<std::size_t>(k)];
  Eigen::RowVectorXd out = row.coef0 * h_inv_at_.row(row.knot0);
  if (row.knot1 >= 0) out += row.coef1 * h_inv_at_.row(row.knot1);
  return out;
}

Eigen::VectorXd KktSystem::apply_a(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(active_count());
  for (Eigen::Index k = 0; k < active_count(); ++k) {
    const ConstraintRow& row = rows_[static_cast<std::size_t>(k)];
    out[k] = row.coef0 * x[row.knot0] + (row.knot1 >= 0 ? row.coef1 * x[row.knot1] : 0.0);
  }
  return out;
}

Eigen::VectorXd KktSystem::apply_at(const Eigen::VectorXd& q) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(hessian_->size());
  for (Eigen::Index k = 0; k < active_count(); ++k) {
    const ConstraintRow& row = rows_[static_cast<std::size_t>(k)];
    out[row.knot0] += row.coef0 * q[k];
    if (row.knot1 >= 0) out[row.knot1] += row.coef1 * q[k];
  }
  return out;
}

Eigen::VectorXd KktSystem::solve_schur(const Eigen::VectorXd& r) const {
  if (active_count() == 0) return Eigen::VectorXd();
  return schur_.solve(r);
}

Eigen::VectorXd WarpGradient::flatten() const {
  const Eigen::Index nx = d_x.size();
  const Eigen::Index ny = d_y.size();
  Eigen::VectorXd z(nx + ny + 1 + d_smin.size() + d_smax.size() + d_bmin.size() + d_bmax.size());
  Eigen::Index at = 0;
  for (Eigen::Index k = 0; k < d_x.rows(); ++k) {
    for (Eigen::Index c = 0; c < d_x.cols(); ++c) z[at++] = d_x(k, c);
  }
  for (Eigen::Index k = 0; k < d_y.rows(); ++k) {
    for (Eigen::Index c = 0; c < d_y.cols(); ++c) z[at++] = d_y(k, c);
  }
  z[at++] = d_lambda;
  for (const Eigen::VectorXd* block : {&d_smin, &d_smax, &d_bmin, &d_bmax}) {
    z.segment(at, block->size()) = *block;
    at += block->size();
  }
  return z;
}

InputLayout input_layout(const GdtwProblem& p) {
  const Eigen::Index d = p.x().dimension();
  const Eigen::Index m = p.knot_count();
  InputLayout l{};
  l.x = 0;
  l.y = l.x + static_cast<Eigen::Index>(p.x().size()) * d;
  l.lambda = l.y + static_cast<Eigen::Index>(p.y().size()) * d;
  l.s_min = l.lambda + 1;
  l.s_max = l.s_min + (m - 1);
  l.b_min = l.s_max + (m - 1);
  l.b_max = l.b_min + m;
  l.total = l.b_max + m;
  return l;
}

namespace {

std::vector<ConstraintRow> rows_for(const ActiveSet& active, Eigen::Index m) {
  std::vector<ConstraintRow> rows;
  rows.reserve(active.indices.size());
  for (const Eigen::Index j : active.indices) rows.push_back(constraint_row(j, m));
  return rows;
}

Eigen::MatrixXd dense_rows(const std::vector<ConstraintRow>& rows, Eigen::Index m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    a(r, rows[k].knot0) = rows[k].coef0;
    if (rows[k].knot1 >= 0) a(r, rows[k].knot1) = rows[k].coef1;
  }
  return a;
}

// Gradient of the unweighted regularizer R with respect to phi.
Eigen::VectorXd regulariser_gradient(const WarpFunction& w) {
  const Eigen::VectorXd& t = w.knots();
  const Eigen::VectorXd& phi = w.values();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(t.size());
  for (Eigen::Index i = 0; i + 1 < t.size(); ++i) {
    const double r = 2.0 * ((phi[i + 1] - phi[i]) / (t[i + 1] - t[i]) - 1.0);
    g[i + 1] += r;
    g[i] -= r;
  }
  return g;
}

// Derivative of a bound-constraint residual with respect to its bound input.
double bound_sensitivity(const ConstraintRow& row, const ConstraintSet& c) {
  switch (row.ref.kind) {
    case ConstraintKind::slope_lower:
      return c.dt(row.ref.index);
    case ConstraintKind::slope_upper:
      return -c.dt(row.ref.index);
    case ConstraintKind::box_lower:
      return 1.0;
    case ConstraintKind::box_upper:
      return -1.0;
  }
  return 0.0;
}

Eigen::Index bound_column(const ConstraintRow& row, const InputLayout& l) {
  switch (row.ref.kind) {
    case ConstraintKind::slope_lower:
      return l.s_min + row.ref.index;
    case ConstraintKind::slope_upper:
      return l.s_max + row.ref.index;
    case ConstraintKind::box_lower:
      return l.b_min + row.ref.index;
    case ConstraintKind::box_upper:
      return l.b_max + row.ref.index;
  }
  return -1;
}

}  // namespace

Eigen::VectorXd active_multipliers(const GdtwProblem& p, const WarpFunction& w,
                                   const ActiveSet& active) {
  if (active.indices.empty()) return Eigen::VectorXd();
  const Eigen::MatrixXd a = dense_rows(rows_for(active, p.knot_count()), p.knot_count());
  const Eigen::VectorXd g = objective_gradient(p, w);
  return a.transpose().colPivHouseholderQr().solve(-g);
}

WarpGradient vjp(const Eigen::VectorXd& v, const GdtwProblem& p, const WarpSolution& sol,
                 const VjpOptions& options) {
  const Eigen::Index m = p.knot_count();
  if (v.size() != m) throw ValidationError("vjp: adjoint has wrong length");
  const WarpFunction& w = sol.warp;
  const ConstraintSet& c = p.constraints();
  const Eigen::VectorXd& phi = w.values();

  WarpGradient out;
  if (sol.kkt > options.grad_tol) {
    out.diagnostics.push_back("kkt residual " + sci(sol.kkt) +
                              " exceeds grad_tol; gradient may be inaccurate");
  }

  const ActiveSet active = detect_active_set(w, c);
  if (!active.pruned.empty()) {
    out.diagnostics.push_back(std::to_string(active.pruned.size()) +
                              " dependent active rows pruned");
  }
  const HessianFactor hessian = build_hessian(p, w);
  if (hessian.damped()) {
    out.diagnostics.push_back("near-singular Hessian damped by " + sci(hessian.damping));
  }
  const KktSystem kkt(hessian, rows_for(active, m));
  if (kkt.active_count() > 0 && !(kkt.schur_rcond() > options.schur_rcond_min)) {
    throw NumericalError("vjp: active-constraint system is numerically singular (rcond " +
                         sci(kkt.schur_rcond()) + ")");
  }

  const Eigen::VectorXd u = hessian.solve(v);
  Eigen::VectorXd q;
  Eigen::VectorXd r = -u;
  if (kkt.active_count() > 0) {
    q = kkt.solve_schur(kkt.apply_a(u));
    r += kkt.h_inv_at() * q;

    const Eigen::VectorXd g = objective_gradient(p, w);
    const Eigen::VectorXd mu = -kkt.solve_schur(kkt.apply_a(hessian.solve(g)));
    const double mu_tol = 1e-8 * (1.0 + g.lpNorm<Eigen::Infinity>());
    const auto weak = (mu.array() <= mu_tol).count();
    if (weak > 0) {
      out.diagnostics.push_back(std::to_string(weak) +
                                " weakly active constraints kept (degenerate complementarity)");
    }
  }

  // (X, Y, lambda) block: r^T B, the directional derivative of grad f along r.
  const Signal& x = p.x();
  const Signal& y = p.y();
  const Eigen::Index d = x.dimension();
  Eigen::MatrixXd dx_value(d, m), dy_value(d, m), dy_derivative(d, m);
  Eigen::VectorXd y_val(d), y_der(d);
  for (Eigen::Index i = 0; i < m; ++i) {
    y.eval_into(phi[i], y_val);
    y.eval_derivative_into(phi[i], y_der);
    const double s = 2.0 * p.weights()[i] * r[i];
    dx_value.col(i) = -s * y_der;
    dy_value.col(i) = s * y_der;
    dy_derivative.col(i) = -s * (p.reference_at_knots().col(i) - y_val);
  }
  out.d_x = x.observation_adjoint(as_span(p.knots()), dx_value, Eigen::MatrixXd());
  out.d_y = y.observation_adjoint(as_span(phi), dy_value, dy_derivative);
  out.d_lambda = r.dot(regulariser_gradient(w));

  // Bounds block: -q^T C.
  out.d_smin = Eigen::VectorXd::Zero(m - 1);
  out.d_smax = Eigen::VectorXd::Zero(m - 1);
  out.d_bmin = Eigen::VectorXd::Zero(m);
  out.d_bmax = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < kkt.active_count(); ++k) {
    const ConstraintRow& row = kkt.rows()[static_cast<std::size_t>(k)];
    const double value = -q[k] * bound_sensitivity(row, c);
    switch (row.ref.kind) {
      case ConstraintKind::slope_lower:
        out.d_smin[row.ref.index] += value;
        break;
      case ConstraintKind::slope_upper:
        out.d_smax[row.ref.index] += value;
        break;
      case ConstraintKind::box_lower:
        out.d_bmin[row.ref.index] += value;
        break;
      case ConstraintKind::box_upper:
        out.d_bmax[row.ref.index] += value;
        break;
    }
  }
  return out;
}

Eigen::MatrixXd jacobian_dense(const GdtwProblem& p, const WarpSolution& sol) {
  const Eigen::Index m = p.knot_count();
  const WarpFunction& w = sol.warp;
  const Eigen::VectorXd& phi = w.values();
  const Signal& x = p.x();
  const Signal& y = p.y();
  const Eigen::Index d = x.dimension();
  const InputLayout layout = input_layout(p);

  // B = D^2_{z phi} f, one column per input.
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, layout.total);
  Eigen::MatrixXd y_val(d, m), y_der(d, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    y_val.col(i) = y.eval(phi[i]);
    y_der.col(i) = y.eval_derivative(phi[i]);
  }
  auto basis = [](const Signal& s, Eigen::Index k) {
    Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), 1);
    unit(k, 0) = 1.0;
    return Signal::build(s.times(), unit, s.interpolation());
  };
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(x.size()); ++k) {
    const Signal e = basis(x, k);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double bx = e.eval(p.knots()[i])[0];
      for (Eigen::Index c = 0; c < d; ++c) {
        b(i, layout.x + k * d + c) = -2.0 * p.weights()[i] * bx * y_der(c, i);
      }
    }
  }
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(y.size()); ++k) {
    const Signal e = basis(y, k);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double by = e.eval(phi[i])[0];
      const double by_der = e.eval_derivative(phi[i])[0];
      for (Eigen::Index c = 0; c < d; ++c) {
        const double residual = p.reference_at_knots()(c, i) - y_val(c, i);
        b(i, layout.y + k * d + c) =
            2.0 * p.weights()[i] * (by * y_der(c, i) - residual * by_der);
      }
    }
  }
  b.col(layout.lambda) = regulariser_gradient(w);

  const ActiveSet active = detect_active_set(w, p.constraints());
  const std::vector<ConstraintRow> rows = rows_for(active, m);
  const Eigen::MatrixXd a = dense_rows(rows, m);
  Eigen::MatrixXd cmat = Eigen::MatrixXd::Zero(a.rows(), layout.total);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    cmat(static_cast<Eigen::Index>(k), bound_column(rows[k], layout)) =
        bound_sensitivity(rows[k], p.constraints());
  }

  const Eigen::MatrixXd h_inv = build_hessian(p, w).dense().fullPivLu().inverse();
  const Eigen::MatrixXd h_inv_b = h_inv * b;
  if (a.rows() == 0) return -h_inv_b;
  const Eigen::MatrixXd h_inv_at = h_inv * a.transpose();
  const Eigen::MatrixXd schur = a * h_inv_at;
  return h_inv_at * schur.fullPivLu().solve(a * h_inv_b - cmat) - h_inv_b;
}

}  // namespace warpgrad
