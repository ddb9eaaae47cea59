#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "warpgrad/errors.hpp"
#include "warpgrad/learn.hpp"
#include "warpgrad/metrics.hpp"

using namespace warpgrad;

namespace {

std::vector<TrainingPair> synth_pairs(int count, int m, int d, double severity, int nuisance = 0) {
  std::vector<TrainingPair> pairs;
  SynthOptions o;
  o.nuisance = nuisance;
  for (int k = 0; k < count; ++k) pairs.push_back(synth_pair(100 + k, m, d, severity, o));
  return pairs;
}

// Replace each ground truth with the solver's own output under `map`.
std::vector<TrainingPair> solver_truth(std::vector<TrainingPair> pairs, const LinearFeatureMap& map,
                                       const TrainConfig& cfg) {
  for (auto& pair : pairs) {
    GdtwProblem p(Signal::build(pair.x.times, map.apply(pair.x.values), cfg.interpolation),
                  Signal::build(pair.y.times, map.apply(pair.y.values), cfg.interpolation),
                  cfg.lambda, default_constraints(pair.gt.knots(), EndpointMode::pinned));
    pair.gt = solve(p, cfg.solver).warp;
  }
  return pairs;
}

}  // namespace

TEST_CASE("synthetic pairs") {
  auto pair = synth_pair(5, 30, 3, 0.3);
  CHECK(pair.x.values.rows() == 30);
  CHECK(pair.y.values.cols() == 3);
  CHECK(pair.gt.values()[0] == 0.0);
  CHECK(pair.gt.values()[29] == 1.0);
  auto c = default_constraints(pair.gt.knots(), EndpointMode::pinned);
  CHECK(constraint_residuals(pair.gt, c).maxCoeff() <= 0.0);

  auto flat = synth_pair(5, 30, 3, 1e-12);
  CHECK((flat.gt.values() - flat.gt.knots()).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((flat.y.values - flat.x.values).lpNorm<Eigen::Infinity>() < 1e-9);

  CHECK(synth_pair(5, 30, 3, 0.3).y.values == pair.y.values);
}

TEST_CASE("solving a clean pair recovers the ground truth") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto pair = synth_pair(seed, 40, 3, 0.3);
    GdtwProblem p(Signal::build(pair.x.times, pair.x.values),
                  Signal::build(pair.y.times, pair.y.values), 0.01,
                  default_constraints(pair.gt.knots(), EndpointMode::pinned));
    SolverOptions o;
    auto sol = solve(p, o);
    const double M = effective_resolution(p, o);
    CHECK(time_err_dev(sol.warp, pair.gt).time_err <= 2.0 / M);
  }
}

TEST_CASE("loss names") {
  CHECK(parse_loss("time_err") == LossKind::time_err);
  CHECK(to_string(parse_loss("mse_on_phi")) == "mse_on_phi");
  CHECK(to_string(LossKind::max_path_error) == "max_path_error");
  CHECK_THROWS_AS(parse_loss("l1"), ValidationError);
}

TEST_CASE("zero learning rate keeps the loss constant") {
  auto pairs = synth_pairs(3, 20, 3, 0.3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.steps = 4;
  auto r = train(pairs, cfg);
  REQUIRE(r.history.size() == 5);
  for (double v : r.history) CHECK(v == r.history.front());
}

TEST_CASE("solver ground truth is stationary") {
  auto pairs = synth_pairs(3, 20, 3, 0.3);
  auto map = LinearFeatureMap::random(2, 3, 7);
  for (auto loss : {LossKind::time_err, LossKind::mse_on_phi}) {
    TrainConfig cfg;
    cfg.loss = loss;
    auto fixed = solver_truth(pairs, map, cfg);
    auto s = loss_and_gradient(fixed, map, cfg);
    CHECK(s.loss < 1e-20);
    CHECK(std::sqrt(s.d_weights.squaredNorm() + s.d_bias.squaredNorm()) < 1e-8);
  }
}

TEST_CASE("training is deterministic") {
  auto pairs = synth_pairs(4, 20, 4, 0.3, 1);
  TrainConfig cfg;
  cfg.steps = 5;
  auto a = train(pairs, cfg);
  auto b = train(pairs, cfg);
  CHECK(a.history == b.history);
  CHECK(a.map.weights == b.map.weights);
}

TEST_CASE("a small step decreases the loss by lr |g|^2") {
  auto pairs = synth_pairs(4, 25, 3, 0.3);
  for (auto loss : {LossKind::mse_on_phi, LossKind::time_err}) {
    TrainConfig cfg;
    cfg.loss = loss;
    auto map = LinearFeatureMap::random(2, 3, 11);
    auto s = loss_and_gradient(pairs, map, cfg);
    const double g2 = s.d_weights.squaredNorm() + s.d_bias.squaredNorm();
    REQUIRE(g2 > 0.0);
    const double lr = 1e-4 / std::sqrt(g2);
    LinearFeatureMap stepped = map;
    stepped.weights -= lr * s.d_weights;
    stepped.bias -= lr * s.d_bias;
    const double after = loss_and_gradient(pairs, stepped, cfg).loss;
    INFO(to_string(loss));
    CHECK((s.loss - after) / (lr * g2) == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("a failing pair is reported by index") {
  auto pairs = synth_pairs(3, 20, 3, 0.3);
  pairs[2].y.values(3, 1) = std::nan("");
  TrainConfig cfg;
  cfg.steps = 1;
  try {
    train(pairs, cfg);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).rfind("pair 2:", 0) == 0);
  }
}
