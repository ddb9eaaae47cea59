#include "warpgrad/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "warpgrad/errors.hpp"
#include "warpgrad/tridiagonal.hpp"

namespace warpgrad {

Interpolation parse_interpolation(std::string_view name) {
  if (name == "linear") return Interpolation::linear;
  if (name == "cubic" || name == "cubic-natural" || name == "cubic_natural") {
    return Interpolation::cubic_natural;
  }
  throw ValidationError("unknown interpolation mode: " + std::string(name));
}

std::string_view to_string(Interpolation mode) {
  return mode == Interpolation::linear ? "linear" : "cubic-natural";
}

namespace {

// Tridiagonal system for interior second derivatives of a natural spline.
TridiagonalLU natural_spline_system(const std::vector<double>& t) {
  const std::size_t n = t.size() - 2;
  std::vector<double> diag(n), off(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = 2.0 * (t[i + 2] - t[i]);
    if (i + 1 < n) off[i] = t[i + 2] - t[i + 1];
  }
  return TridiagonalLU(off, diag, off);
}

}  // namespace

Signal Signal::build(std::span<const double> times, const Eigen::MatrixXd& observations,
                     Interpolation mode) {
  const std::size_t n = times.size();
  if (n < 2) throw ValidationError("a signal needs at least 2 samples");
  if (static_cast<std::size_t>(observations.rows()) != n) {
    throw ValidationError("observation rows (" + std::to_string(observations.rows()) +
                          ") do not match timestamp count (" + std::to_string(n) + ")");
  }
  if (observations.cols() < 1) throw ValidationError("feature dimension must be >= 1");
  if (!observations.allFinite()) throw ValidationError("observations contain NaN or Inf");
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(times[k])) throw ValidationError("timestamps contain NaN or Inf");
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw ValidationError("timestamps must be strictly increasing (index " + std::to_string(k) +
                            ")");
    }
  }

  Signal s;
  s.mode_ = mode;
  s.axis_ = TimeAxis{times[0], times[n - 1] - times[0]};
  s.times_.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.times_[k] = s.axis_.to_unit(times[k]);
  s.times_.front() = 0.0;
  s.times_.back() = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    if (!(s.times_[k] > s.times_[k - 1])) {
      throw ValidationError("timestamps collapse after normalization");
    }
  }
  s.observations_ = observations;
  s.curvature_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), observations.cols());

  if (mode == Interpolation::cubic_natural && n > 2) {
    const auto& t = s.times_;
    const TridiagonalLU system = natural_spline_system(t);
    std::vector<double> rhs(n - 2);
    for (Eigen::Index c = 0; c < observations.cols(); ++c) {
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const double right = (observations(i + 1, c) - observations(i, c)) / (t[i + 1] - t[i]);
        const double left = (observations(i, c) - observations(i - 1, c)) / (t[i] - t[i - 1]);
        rhs[i - 1] = 6.0 * (right - left);
      }
      system.solve_in_place(rhs);
      for (std::size_t i = 1; i + 1 < n; ++i) s.curvature_(i, c) = rhs[i - 1];
    }
  }
  return s;
}

void Signal::check_time(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("signal evaluated outside [0, 1] at t = " + std::to_string(t));
  }
}

std::size_t Signal::segment(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times_.begin() - 1, 0));
  return std::min(k, times_.size() - 2);
}

void Signal::eval_into(double t, Eigen::Ref<Eigen::VectorXd> out) const {
  check_time(t);
  const std::size_t k = segment(t);
  const double h = times_[k + 1] - times_[k];
  const double b = (t - times_[k]) / h;
  const double a = 1.0 - b;
  out = a * observations_.row(k).transpose() + b * observations_.row(k + 1).transpose();
  if (mode_ == Interpolation::cubic_natural) {
    const double ca = (a * a * a - a) * h * h / 6.0;
    const double cb = (b * b * b - b) * h * h / 6.0;
    out += ca * curvature_.row(k).transpose() + cb * curvature_.row(k + 1).transpose();
  }
}

void Signal::eval_derivative_into(double t, Eigen::Ref<Eigen::VectorXd> out) const {
  check_time(t);
  const std::size_t k = segment(t);
  const double h = times_[k + 1] - times_[k];
  out = (observations_.row(k + 1) - observations_.row(k)).transpose() / h;
  if (mode_ == Interpolation::cubic_natural) {
    const double b = (t - times_[k]) / h;
    const double a = 1.0 - b;
    out += -(3.0 * a * a - 1.0) * h / 6.0 * curvature_.row(k).transpose() +
           (3.0 * b * b - 1.0) * h / 6.0 * curvature_.row(k + 1).transpose();
  }
}

void Signal::eval_second_derivative_into(double t, Eigen::Ref<Eigen::VectorXd> out) const {
  check_time(t);
  if (mode_ == Interpolation::linear) {
    out.setZero();
    return;
  }
  const std::size_t k = segment(t);
  const double b = (t - times_[k]) / (times_[k + 1] - times_[k]);
  out = (1.0 - b) * curvature_.row(k).transpose() + b * curvature_.row(k + 1).transpose();
}

Eigen::VectorXd Signal::eval(double t) const {
  Eigen::VectorXd out(dimension());
  eval_into(t, out);
  return out;
}

Eigen::VectorXd Signal::eval_derivative(double t) const {
  Eigen::VectorXd out(dimension());
  eval_derivative_into(t, out);
  return out;
}

Eigen::VectorXd Signal::eval_second_derivative(double t) const {
  Eigen::VectorXd out(dimension());
  eval_second_derivative_into(t, out);
  return out;
}

Eigen::MatrixXd Signal::observation_adjoint(std::span<const double> t,
                                            const Eigen::MatrixXd& d_value,
                                            const Eigen::MatrixXd& d_derivative) const {
  const auto n = static_cast<Eigen::Index>(times_.size());
  const Eigen::Index d = dimension();
  const auto q = static_cast<Eigen::Index>(t.size());
  const bool has_value = d_value.size() > 0;
  const bool has_derivative = d_derivative.size() > 0;
  if ((has_value && (d_value.rows() != d || d_value.cols() != q)) ||
      (has_derivative && (d_derivative.rows() != d || d_derivative.cols() != q))) {
    throw ValidationError("observation_adjoint: adjoint shape mismatch");
  }

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd grad_curv = Eigen::MatrixXd::Zero(n, d);
  const bool cubic = mode_ == Interpolation::cubic_natural;

  for (Eigen::Index j = 0; j < q; ++j) {
    check_time(t[j]);
    const std::size_t k = segment(t[j]);
    const auto k0 = static_cast<Eigen::Index>(k);
    const double h = times_[k + 1] - times_[k];
    const double b = (t[j] - times_[k]) / h;
    const double a = 1.0 - b;
    if (has_value) {
      grad.row(k0) += a * d_value.col(j).transpose();
      grad.row(k0 + 1) += b * d_value.col(j).transpose();
      if (cubic) {
        grad_curv.row(k0) += (a * a * a - a) * h * h / 6.0 * d_value.col(j).transpose();
        grad_curv.row(k0 + 1) += (b * b * b - b) * h * h / 6.0 * d_value.col(j).transpose();
      }
    }
    if (has_derivative) {
      grad.row(k0 + 1) += d_derivative.col(j).transpose() / h;
      grad.row(k0) -= d_derivative.col(j).transpose() / h;
      if (cubic) {
        grad_curv.row(k0) += -(3.0 * a * a - 1.0) * h / 6.0 * d_derivative.col(j).transpose();
        grad_curv.row(k0 + 1) += (3.0 * b * b - 1.0) * h / 6.0 * d_derivative.col(j).transpose();
      }
    }
  }

  if (cubic && n > 2) {
    // Interior curvatures are T^{-1} R Y with T symmetric, so the pullback is R^T T^{-1}.
    const TridiagonalLU system = natural_spline_system(times_);
    std::vector<double> z(static_cast<std::size_t>(n - 2));
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index i = 1; i + 1 < n; ++i) z[i - 1] = grad_curv(i, c);
      system.solve_in_place(z);
      for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const double hl = times_[i] - times_[i - 1];
        const double hr = times_[i + 1] - times_[i];
        const double w = 6.0 * z[i - 1];
        grad(i + 1, c) += w / hr;
        grad(i, c) -= w / hr + w / hl;
        grad(i - 1, c) += w / hl;
      }
    }
  }
  return grad;
}

}  // namespace warpgrad
