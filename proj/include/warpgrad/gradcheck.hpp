#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/implicit_grad.hpp"

namespace warpgrad {

struct InstanceSpec {
  int samples = 16;  // per signal
  int dims = 2;
  int knots = 12;
  double lambda = 0.05;
  Interpolation interpolation = Interpolation::cubic_natural;
  int cuts = 4;  // bounds placed through the unconstrained optimum
};

/// Problem and high-accuracy solution.
struct Instance {
  GdtwProblem problem;
  WarpSolution solution;
};

/// Solver settings used for re-solve finite differences.
SolverOptions accurate_solver();

/// Random smooth problem with free endpoints whose solution has a few active
/// slope and box bounds. Returns nullopt when the draw is not strictly
/// complementary.
std::optional<Instance> random_instance(std::uint64_t seed, const InstanceSpec& spec);

/// Every near-active row is kept (no pruning), has multiplier > mu_tol, and
/// every other constraint has slack > slack_tol.
bool strictly_complementary(const GdtwProblem& p, const WarpFunction& w, double slack_tol = 1e-5,
                            double mu_tol = 1e-6);

/// Same problem with entry `k` of the flattened input vector shifted by `delta`
/// (layout as in input_layout).
GdtwProblem perturb_input(const GdtwProblem& p, Eigen::Index k, double delta);

/// Worst |a - b| / max(rtol * max(|a|, |b|), atol); <= 1 means agreement.
double agreement_ratio(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rtol,
                       double atol);

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int instances = 5;
  int knots = 12;
  double fd_step = 1e-5;
};

struct GradcheckReport {
  bool passed = true;
  double worst_dense = 0.0;  // relative error of vjp against jacobian_dense
  std::vector<std::pair<std::string, double>> worst_fd;  // per input block, agreement ratio
  int instances_checked = 0;
  std::vector<std::string> notes;
};

/// vjp against jacobian_dense and against central differences of re-solved
/// problems, plus the damped lambda = 0 flat-signal case.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace warpgrad
