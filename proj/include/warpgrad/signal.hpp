#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace warpgrad {

enum class Interpolation { linear, cubic_natural };

Interpolation parse_interpolation(std::string_view name);
std::string_view to_string(Interpolation mode);

/// Affine map between original time units and the unit interval.
struct TimeAxis {
  double offset = 0.0;
  double scale = 1.0;

  double to_unit(double t) const { return (t - offset) / scale; }
  double to_original(double u) const { return offset + scale * u; }
};

/// Continuous-time signal on [0, 1] interpolating a time series.
///
/// Observations are stored N x d (one row per sample). The interpolant is exact
/// at every sample time. Derivatives at interior sample times of a linear
/// interpolant use the right-hand slope, and the left-hand slope at t = 1.
/// The second derivative of a linear interpolant is zero everywhere.
class Signal {
 public:
  /// Normalizes `times` affinely onto [0, 1]; throws ValidationError on fewer
  /// than two samples, non-increasing times, or non-finite entries.
  static Signal build(std::span<const double> times, const Eigen::MatrixXd& observations,
                      Interpolation mode = Interpolation::linear);

  std::size_t size() const { return times_.size(); }
  Eigen::Index dimension() const { return observations_.cols(); }
  Interpolation interpolation() const { return mode_; }
  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& observations() const { return observations_; }
  const TimeAxis& axis() const { return axis_; }

  Eigen::VectorXd eval(double t) const;
  Eigen::VectorXd eval_derivative(double t) const;
  Eigen::VectorXd eval_second_derivative(double t) const;

  // Allocation-free variants; `out` must have dimension() entries.
  void eval_into(double t, Eigen::Ref<Eigen::VectorXd> out) const;
  void eval_derivative_into(double t, Eigen::Ref<Eigen::VectorXd> out) const;
  void eval_second_derivative_into(double t, Eigen::Ref<Eigen::VectorXd> out) const;

  /// Pulls adjoints on interpolated values and first derivatives back onto the
  /// observations. Column q of `d_value` / `d_derivative` (d x Q) is the adjoint
  /// of eval(t[q]) / eval_derivative(t[q]); either matrix may be empty.
  /// Returns an N x d matrix.
  Eigen::MatrixXd observation_adjoint(std::span<const double> t, const Eigen::MatrixXd& d_value,
                                      const Eigen::MatrixXd& d_derivative) const;

 private:
  Signal() = default;

  std::size_t segment(double t) const;
  void check_time(double t) const;

  std::vector<double> times_;
  Eigen::MatrixXd observations_;
  Eigen::MatrixXd curvature_;  // spline second derivatives at samples (cubic mode)
  Interpolation mode_ = Interpolation::linear;
  TimeAxis axis_;
};

}  // namespace warpgrad
