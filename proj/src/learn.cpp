#include "warpgrad/learn.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <string>

#include "warpgrad/errors.hpp"
#include "warpgrad/implicit_grad.hpp"
#include "warpgrad/metrics.hpp"

namespace warpgrad {

LinearFeatureMap LinearFeatureMap::random(Eigen::Index d_out, Eigen::Index d_in,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
  LinearFeatureMap map{Eigen::MatrixXd(d_out, d_in), Eigen::VectorXd::Zero(d_out)};
  for (Eigen::Index r = 0; r < d_out; ++r) {
    for (Eigen::Index c = 0; c < d_in; ++c) map.weights(r, c) = normal(rng);
  }
  return map;
}

Eigen::MatrixXd LinearFeatureMap::apply(const Eigen::MatrixXd& values) const {
  if (values.cols() != weights.cols()) {
    throw ValidationError("feature map expects " + std::to_string(weights.cols()) +
                          " input channels, got " + std::to_string(values.cols()));
  }
  Eigen::MatrixXd out = values * weights.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

LossKind parse_loss(std::string_view name) {
  if (name == "time_err") return LossKind::time_err;
  if (name == "mse_on_phi") return LossKind::mse_on_phi;
  if (name == "max_path_error") return LossKind::max_path_error;
  throw ValidationError("unknown loss '" + std::string(name) +
                        "' (expected time_err, mse_on_phi or max_path_error)");
}

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::time_err:
      return "time_err";
    case LossKind::mse_on_phi:
      return "mse_on_phi";
    case LossKind::max_path_error:
      return "max_path_error";
  }
  return "?";
}

namespace {

Eigen::VectorXd gt_at_knots(const WarpFunction& pred, const WarpFunction& gt) {
  Eigen::VectorXd g(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) g[i] = gt(pred.knots()[i]);
  return g;
}

}  // namespace

std::pair<double, Eigen::VectorXd> warp_loss(LossKind kind, const WarpFunction& pred,
                                             const WarpFunction& gt) {
  switch (kind) {
    case LossKind::time_err:
      return {time_err_dev(pred, gt).time_err, time_err_gradient(pred, gt)};
    case LossKind::mse_on_phi: {
      const Eigen::VectorXd diff = pred.values() - gt_at_knots(pred, gt);
      const auto m = static_cast<double>(diff.size());
      return {diff.squaredNorm() / m, 2.0 * diff / m};
    }
    case LossKind::max_path_error: {
      const std::vector<double> times{0.0, 1.0};
      const Signal geo = Signal::build(times, Eigen::Vector2d(0.0, 1.0));
      const Eigen::MatrixXd query = gt_at_knots(pred, gt);
      const PathError e = max_path_error(geo, pred, query);
      return {e.smooth_max,
              max_path_error_gradient(geo, pred, query, PathReduction::smooth_max, e.tau)};
    }
  }
  return {0.0, Eigen::VectorXd()};
}

namespace {

struct PairGradient {
  double loss = 0.0;
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_bias;
};

PairGradient pair_gradient(const TrainingPair& pair, const LinearFeatureMap& map,
                           const TrainConfig& cfg) {
  const Signal x = Signal::build(pair.x.times, map.apply(pair.x.values), cfg.interpolation);
  const Signal y = Signal::build(pair.y.times, map.apply(pair.y.values), cfg.interpolation);
  const GdtwProblem problem(x, y, cfg.lambda,
                            default_constraints(pair.gt.knots(), EndpointMode::pinned));
  SolverOptions solver = cfg.solver;
  solver.backend = kernels::Backend::serial;
  const WarpSolution sol = solve(problem, solver);
  auto [loss, d_phi] = warp_loss(cfg.loss, sol.warp, pair.gt);

  PairGradient out;
  out.loss = loss;
  const WarpGradient g = vjp(d_phi, problem, sol);
  out.d_weights = g.d_x.transpose() * pair.x.values + g.d_y.transpose() * pair.y.values;
  out.d_bias = g.d_x.colwise().sum().transpose() + g.d_y.colwise().sum().transpose();
  return out;
}

[[noreturn]] void rethrow_with_pair(std::exception_ptr error, std::size_t index) {
  const std::string prefix = "pair " + std::to_string(index) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

}  // namespace

StepResult loss_and_gradient(const std::vector<TrainingPair>& pairs, const LinearFeatureMap& map,
                             const TrainConfig& cfg) {
  if (pairs.empty()) throw ValidationError("no training pairs");
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
  std::vector<PairGradient> parts(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      parts[i] = pair_gradient(pairs[i], map, cfg);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) rethrow_with_pair(errors[i], i);
  }

  // Summed in pair order so the result does not depend on scheduling.
  StepResult out{0.0, Eigen::MatrixXd::Zero(map.weights.rows(), map.weights.cols()),
                 Eigen::VectorXd::Zero(map.bias.size())};
  for (const PairGradient& part : parts) {
    out.loss += part.loss;
    out.d_weights += part.d_weights;
    out.d_bias += part.d_bias;
  }
  const double scale = 1.0 / static_cast<double>(pairs.size());
  out.loss *= scale;
  out.d_weights *= scale;
  out.d_bias *= scale;
  return out;
}

TrainResult train(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                  std::optional<LinearFeatureMap> initial) {
  if (!(cfg.learning_rate >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (cfg.steps < 0) throw ValidationError("steps must be >= 0");
  if (pairs.empty()) throw ValidationError("no training pairs");
  const Eigen::Index d_in = pairs.front().x.values.cols();

  TrainResult result;
  result.map = initial ? *initial : LinearFeatureMap::random(d_in, d_in, cfg.seed);
  for (int step = 0; step < cfg.steps; ++step) {
    const StepResult s = loss_and_gradient(pairs, result.map, cfg);
    result.history.push_back(s.loss);
    result.gradient_norms.push_back(
        std::sqrt(s.d_weights.squaredNorm() + s.d_bias.squaredNorm()));
    result.map.weights -= cfg.learning_rate * s.d_weights;
    result.map.bias -= cfg.learning_rate * s.d_bias;
  }
  result.history.push_back(loss_and_gradient(pairs, result.map, cfg).loss);
  return result;
}

namespace {

struct Harmonics {
  double amp[3], freq[3], phase[3];

  double operator()(double t) const {
    double v = 0.0;
    for (int h = 0; h < 3; ++h) v += amp[h] * std::sin(2.0 * std::numbers::pi * freq[h] * t + phase[h]);
    return v;
  }
};

Harmonics random_harmonics(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Harmonics h{};
  for (int k = 0; k < 3; ++k) {
    const double order = k + 1;
    h.amp[k] = normal(rng) / order;
    h.freq[k] = order * (0.5 + 0.5 * unit(rng));
    h.phase[k] = 2.0 * std::numbers::pi * unit(rng);
  }
  return h;
}

// Inverse of a strictly increasing piecewise-linear map.
double invert(const WarpFunction& w, double s) {
  const Eigen::VectorXd& t = w.knots();
  const Eigen::VectorXd& v = w.values();
  const auto* begin = v.data();
  const auto* end = begin + v.size();
  const auto hi = std::upper_bound(begin, end, s);
  Eigen::Index k = std::max<Eigen::Index>(hi - begin - 1, 0);
  k = std::min<Eigen::Index>(k, v.size() - 2);
  if (s == v[k]) return t[k];
  if (s == v[k + 1]) return t[k + 1];
  const double b = (s - v[k]) / (v[k + 1] - v[k]);
  return t[k] + b * (t[k + 1] - t[k]);
}

}  // namespace

TrainingPair synth_pair(std::uint64_t seed, int m, int d, double severity,
                        const SynthOptions& options) {
  if (m < 2 || d < 1) throw ValidationError("synth_pair needs m >= 2 and d >= 1");
  if (!(severity >= 0.0 && severity < 1.0)) throw ValidationError("severity must lie in [0, 1)");
  if (options.nuisance < 0 || options.nuisance >= d) {
    throw ValidationError("nuisance channel count must lie in [0, d)");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // phi(t) = t + a (cos p - cos(2 pi k t + p)) / (2 pi k): slope 1 + a sin(2 pi k t + p)
  // and phi(1) = 1 exactly for integer k.
  const double amplitude = severity * (0.5 + 0.5 * unit(rng));
  const int cycles = unit(rng) < 0.5 ? 1 : 2;
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const Eigen::VectorXd knots = uniform_knots(m);
  Eigen::VectorXd phi(m);
  const double omega = 2.0 * std::numbers::pi * cycles;
  for (Eigen::Index i = 0; i < m; ++i) {
    phi[i] = knots[i] + amplitude * (std::cos(phase) - std::cos(omega * knots[i] + phase)) / omega;
  }
  phi[0] = 0.0;
  phi[m - 1] = 1.0;
  WarpFunction gt(knots, phi);

  const int informative = d - options.nuisance;
  std::vector<Harmonics> x_channels, y_channels;
  for (int c = 0; c < d; ++c) x_channels.push_back(random_harmonics(rng));
  for (int c = informative; c < d; ++c) y_channels.push_back(random_harmonics(rng));

  std::normal_distribution<double> noise(0.0, options.noise > 0.0 ? options.noise : 1.0);
  TrainingPair pair{{std::vector<double>(knots.begin(), knots.end()), Eigen::MatrixXd(m, d)},
                    {std::vector<double>(knots.begin(), knots.end()), Eigen::MatrixXd(m, d)},
                    gt};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double source = invert(gt, knots[i]);
    for (int c = 0; c < d; ++c) {
      pair.x.values(i, c) = x_channels[static_cast<std::size_t>(c)](knots[i]);
      pair.y.values(i, c) = c < informative
                                ? x_channels[static_cast<std::size_t>(c)](source)
                                : y_channels[static_cast<std::size_t>(c - informative)](knots[i]);
      if (options.noise > 0.0) pair.y.values(i, c) += noise(rng);
    }
  }
  return pair;
}

}  // namespace warpgrad
