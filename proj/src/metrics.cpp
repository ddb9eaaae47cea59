#include "warpgrad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "warpgrad/errors.hpp"

namespace warpgrad {

namespace {

// Piecewise-linear curve evaluation with clamping at the ends; also returns the
// segment and its interpolation weight for the adjoint.
struct Hat {
  std::size_t k;
  double b;
};

Hat locate(std::span<const double> knots, double t) {
  const auto hi = std::upper_bound(knots.begin(), knots.end(), t);
  std::size_t k = hi == knots.begin() ? 0 : static_cast<std::size_t>(hi - knots.begin() - 1);
  k = std::min(k, knots.size() - 2);
  double b = (t - knots[k]) / (knots[k + 1] - knots[k]);
  b = std::clamp(b, 0.0, 1.0);
  return {k, b};
}

double interp(std::span<const double> knots, std::span<const double> values, double t) {
  const Hat h = locate(knots, t);
  if (h.b == 0.0) return values[h.k];
  if (h.b == 1.0) return values[h.k + 1];
  return (1.0 - h.b) * values[h.k] + h.b * values[h.k + 1];
}

std::vector<double> merged_breaks(std::span<const double> a, std::span<const double> b, double lo,
                                  double hi) {
  std::vector<double> out{lo, hi};
  for (const double t : a) {
    if (t > lo && t < hi) out.push_back(t);
  }
  for (const double t : b) {
    if (t > lo && t < hi) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Integral of |linear| over a segment of length h with end values u, v.
double abs_integral(double h, double u, double v) {
  if ((u >= 0.0 && v >= 0.0) || (u <= 0.0 && v <= 0.0)) return 0.5 * h * std::abs(u + v);
  return 0.5 * h * (u * u + v * v) / (std::abs(u) + std::abs(v));
}

// Partial derivatives of abs_integral with respect to u and v.
std::pair<double, double> abs_integral_grad(double h, double u, double v) {
  if ((u >= 0.0 && v >= 0.0) || (u <= 0.0 && v <= 0.0)) {
    const double s = (u + v > 0.0) ? 1.0 : (u + v < 0.0 ? -1.0 : 0.0);
    return {0.5 * h * s, 0.5 * h * s};
  }
  const double a = std::abs(u) + std::abs(v);
  const double q = u * u + v * v;
  const double su = u > 0.0 ? 1.0 : -1.0;
  const double sv = -su;
  return {0.5 * h * (2.0 * u * a - q * su) / (a * a), 0.5 * h * (2.0 * v * a - q * sv) / (a * a)};
}

double square_integral(double h, double u, double v) { return h * (u * u + u * v + v * v) / 3.0; }

struct Integrals {
  double abs = 0.0;
  double square = 0.0;
};

Integrals integrate(std::span<const double> pk, std::span<const double> pv,
                    std::span<const double> gk, std::span<const double> gv, double lo, double hi) {
  const std::vector<double> s = merged_breaks(pk, gk, lo, hi);
  Integrals out;
  double u = interp(pk, pv, s[0]) - interp(gk, gv, s[0]);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double v = interp(pk, pv, s[k + 1]) - interp(gk, gv, s[k + 1]);
    const double h = s[k + 1] - s[k];
    out.abs += abs_integral(h, u, v);
    out.square += square_integral(h, u, v);
    u = v;
  }
  return out;
}

void check_curve(std::span<const double> knots, std::span<const double> values, const char* name) {
  if (knots.size() < 2 || knots.size() != values.size()) {
    throw ValidationError(std::string(name) + ": need >= 2 knots and one value per knot");
  }
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (!(knots[i + 1] > knots[i])) {
      throw ValidationError(std::string(name) + ": knots must be strictly increasing");
    }
  }
  for (const double v : values) {
    if (!std::isfinite(v)) throw ValidationError(std::string(name) + ": non-finite value");
  }
}

std::span<const double> span_of(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Adjoint of d(s) = pred(s) - gt(s) at every merged break point, pulled back
// onto pred's knot values.
template <typename SegmentGrad>
Eigen::VectorXd pred_adjoint(const WarpFunction& pred, const WarpFunction& gt, SegmentGrad grad) {
  const auto pk = span_of(pred.knots());
  const auto pv = span_of(pred.values());
  const auto gk = span_of(gt.knots());
  const auto gv = span_of(gt.values());
  const std::vector<double> s = merged_breaks(pk, gk, 0.0, 1.0);
  std::vector<double> d(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) d[k] = interp(pk, pv, s[k]) - interp(gk, gv, s[k]);
  std::vector<double> adj(s.size(), 0.0);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const auto [du, dv] = grad(s[k + 1] - s[k], d[k], d[k + 1]);
    adj[k] += du;
    adj[k + 1] += dv;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(pred.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Hat h = locate(pk, s[k]);
    out[static_cast<Eigen::Index>(h.k)] += (1.0 - h.b) * adj[k];
    out[static_cast<Eigen::Index>(h.k + 1)] += h.b * adj[k];
  }
  return out;
}

}  // namespace

AlignmentError time_err_dev(std::span<const double> pred_knots, std::span<const double> pred_values,
                            std::span<const double> gt_knots, std::span<const double> gt_values) {
  check_curve(pred_knots, pred_values, "pred");
  check_curve(gt_knots, gt_values, "gt");
  const double lo = std::max(pred_knots.front(), gt_knots.front());
  const double hi = std::min(pred_knots.back(), gt_knots.back());
  const double union_len = std::max(pred_knots.back(), gt_knots.back()) -
                           std::min(pred_knots.front(), gt_knots.front());
  if (!(hi > lo)) {
    throw ValidationError("warps share no common domain (coverage 0)");
  }
  const Integrals in = integrate(pred_knots, pred_values, gt_knots, gt_values, lo, hi);
  const double len = hi - lo;
  return {in.abs / len, std::sqrt(in.square / len), len / union_len};
}

AlignmentError time_err_dev(const WarpFunction& pred, const WarpFunction& gt) {
  return time_err_dev(span_of(pred.knots()), span_of(pred.values()), span_of(gt.knots()),
                      span_of(gt.values()));
}

Eigen::VectorXd time_err_gradient(const WarpFunction& pred, const WarpFunction& gt) {
  return pred_adjoint(pred, gt, abs_integral_grad);
}

Eigen::VectorXd time_dev_gradient(const WarpFunction& pred, const WarpFunction& gt) {
  const double dev = time_err_dev(pred, gt).time_dev;
  if (dev == 0.0) return Eigen::VectorXd::Zero(pred.size());
  const double scale = 0.5 / dev;
  return pred_adjoint(pred, gt, [scale](double h, double u, double v) {
    return std::pair{scale * h * (2.0 * u + v) / 3.0, scale * h * (u + 2.0 * v) / 3.0};
  });
}

double default_temperature(const Eigen::VectorXd& errors) {
  const double mean = errors.size() > 0 ? errors.mean() : 0.0;
  return mean > 0.0 ? 0.01 * mean : 1e-12;
}

namespace {

void check_query(const Signal& ref_geo, const WarpFunction& pred, const Eigen::MatrixXd& query) {
  if (query.rows() != pred.size()) {
    throw ValidationError("query_geo has " + std::to_string(query.rows()) + " rows, warp has " +
                          std::to_string(pred.size()) + " knots");
  }
  if (query.cols() != ref_geo.dimension()) {
    throw ValidationError("query_geo dimension " + std::to_string(query.cols()) +
                          " differs from reference dimension " +
                          std::to_string(ref_geo.dimension()));
  }
}

Eigen::VectorXd softmax_weights(const Eigen::VectorXd& e, double max, double tau) {
  Eigen::VectorXd p = ((e.array() - max) / tau).exp();
  return p / p.sum();
}

}  // namespace

PathError max_path_error(const Signal& ref_geo, const WarpFunction& pred,
                         const Eigen::MatrixXd& query_geo, double tau) {
  check_query(ref_geo, pred, query_geo);
  PathError out;
  out.errors.resize(pred.size());
  Eigen::VectorXd g(ref_geo.dimension());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    ref_geo.eval_into(pred.values()[i], g);
    out.errors[i] = (g - query_geo.row(i).transpose()).squaredNorm();
  }
  out.max = out.errors.maxCoeff(&out.argmax);
  out.mean = out.errors.mean();
  out.tau = tau > 0.0 ? tau : default_temperature(out.errors);
  out.smooth_max =
      out.max + out.tau * std::log(((out.errors.array() - out.max) / out.tau).exp().sum());
  return out;
}

Eigen::VectorXd max_path_error_gradient(const Signal& ref_geo, const WarpFunction& pred,
                                        const Eigen::MatrixXd& query_geo, PathReduction reduction,
                                        double tau) {
  const PathError e = max_path_error(ref_geo, pred, query_geo, tau);
  const Eigen::Index m = pred.size();
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(m);
  switch (reduction) {
    case PathReduction::hard_max:
      weight[e.argmax] = 1.0;
      break;
    case PathReduction::mean:
      weight.setConstant(1.0 / static_cast<double>(m));
      break;
    case PathReduction::smooth_max:
      weight = softmax_weights(e.errors, e.max, e.tau);
      break;
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g(ref_geo.dimension()), dg(ref_geo.dimension());
  for (Eigen::Index i = 0; i < m; ++i) {
    if (weight[i] == 0.0) continue;
    ref_geo.eval_into(pred.values()[i], g);
    ref_geo.eval_derivative_into(pred.values()[i], dg);
    grad[i] = weight[i] * 2.0 * (g - query_geo.row(i).transpose()).dot(dg);
  }
  return grad;
}

}  // namespace warpgrad
