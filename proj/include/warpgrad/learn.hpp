#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/signal.hpp"
#include "warpgrad/warp.hpp"

namespace warpgrad {

/// Raw time series: sample times and an N x d observation matrix.
struct Series {
  std::vector<double> times;
  Eigen::MatrixXd values;
};

/// features = values * weights^T + bias^T, shared by both series of a pair.
struct LinearFeatureMap {
  Eigen::MatrixXd weights;  // d_out x d_in
  Eigen::VectorXd bias;     // d_out

  static LinearFeatureMap random(Eigen::Index d_out, Eigen::Index d_in, std::uint64_t seed);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
};

struct TrainingPair {
  Series x;
  Series y;
  WarpFunction gt;  // x time -> y time, on the warp knots used for solving
};

enum class LossKind { time_err, mse_on_phi, max_path_error };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind loss);

struct TrainConfig {
  double learning_rate = 1.0;
  int steps = 100;
  LossKind loss = LossKind::time_err;
  double lambda = 0.05;
  SolverOptions solver;
  Interpolation interpolation = Interpolation::linear;
  std::uint64_t seed = 0;  // initial map when none is supplied
};

struct PairLoss {
  double loss;
  Eigen::VectorXd d_phi;  // dloss / dphi*
  WarpSolution solution;
};

/// Loss of a solved warp against the ground truth, and its gradient in phi.
/// max_path_error uses y's time as the geotag: e_i = (phi_i - gt(t_i))^2 with
/// a smooth max for the gradient.
std::pair<double, Eigen::VectorXd> warp_loss(LossKind kind, const WarpFunction& pred,
                                             const WarpFunction& gt);

struct StepResult {
  double loss = 0.0;  // mean over pairs
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_bias;
};

/// Mean loss over the pairs and its gradient with respect to the map.
StepResult loss_and_gradient(const std::vector<TrainingPair>& pairs, const LinearFeatureMap& map,
                             const TrainConfig& cfg);

struct TrainResult {
  LinearFeatureMap map;
  std::vector<double> history;  // loss before each step, then the final loss
  std::vector<double> gradient_norms;
};

/// Plain gradient descent. Throws with the pair index when a solve fails.
TrainResult train(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                  std::optional<LinearFeatureMap> initial = std::nullopt);

struct SynthOptions {
  int nuisance = 0;      // trailing channels that differ between x and y and carry no warp
  double noise = 0.0;    // gaussian noise std added to y
};

/// Smooth random d-channel x sampled at m uniform times, a smooth monotone
/// gt warp t + a (cos p - cos(2 pi k t + p)) / (2 pi k) with k in {1, 2} and
/// a = severity * U[0.5, 1], and y = x o gt^{-1} on the same grid. Nuisance
/// channels of y are drawn independently of x.
TrainingPair synth_pair(std::uint64_t seed, int m, int d, double severity,
                        const SynthOptions& options = {});

}  // namespace warpgrad
