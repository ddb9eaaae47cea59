#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/objective.hpp"
#include "warpgrad/signal.hpp"
#include "warpgrad/warp.hpp"

namespace testing {

inline std::vector<double> uniform_times(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = static_cast<double>(i) / (n - 1);
  return t;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

/// Sum of a few random sinusoids per channel sampled at n uniform times.
inline Eigen::MatrixXd smooth_values(std::mt19937_64& rng, int n, int d, int harmonics = 3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, d);
  for (int c = 0; c < d; ++c) {
    for (int h = 1; h <= harmonics; ++h) {
      const double amp = (2.0 * u(rng) - 1.0) / h;
      const double phase = 2.0 * M_PI * u(rng);
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        v(i, c) += amp * std::sin(2.0 * M_PI * h * t + phase);
      }
    }
  }
  return v;
}

inline warpgrad::Signal smooth_signal(std::mt19937_64& rng, int n, int d,
                                      warpgrad::Interpolation mode = warpgrad::Interpolation::linear) {
  return warpgrad::Signal::build(uniform_times(n), smooth_values(rng, n, d), mode);
}

inline warpgrad::GdtwProblem smooth_problem(std::mt19937_64& rng, int n, int d, int m,
                                            double lambda,
                                            warpgrad::Interpolation mode = warpgrad::Interpolation::linear) {
  auto x = smooth_signal(rng, n, d, mode);
  auto y = smooth_signal(rng, n, d, mode);
  return {std::move(x), std::move(y), lambda,
          warpgrad::default_constraints(warpgrad::uniform_knots(m), warpgrad::EndpointMode::pinned)};
}

/// Central-difference gradient of a scalar function of a vector.
template <class F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>(), 1e-300});
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace testing
