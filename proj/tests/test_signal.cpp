#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "warpgrad/errors.hpp"
#include "warpgrad/signal.hpp"

using namespace warpgrad;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(v.size(), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("build normalizes times onto the unit interval") {
  auto s = Signal::build(std::vector<double>{10, 20, 30}, column({1, 2, 3}));
  CHECK(s.times() == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(s.axis().to_original(0.5) == 20.0);
  CHECK(s.axis().to_unit(30.0) == 1.0);
}

TEST_CASE("build rejects bad input") {
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0}, column({1})), ValidationError);
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0, 0, 1}, column({1, 2, 3})), ValidationError);
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0, 2, 1}, column({1, 2, 3})), ValidationError);
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0, 1}, column({1, NAN})), ValidationError);
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0, INFINITY}, column({1, 2})), ValidationError);
  CHECK_THROWS_AS(Signal::build(std::vector<double>{0, 1, 2}, column({1, 2})), ValidationError);
}

TEST_CASE("constant signal") {
  auto s = Signal::build(std::vector<double>{0, 1}, column({5, 5}));
  for (double t : {0.0, 0.3, 1.0}) {
    CHECK(s.eval(t)[0] == 5.0);
    CHECK(s.eval_derivative(t)[0] == 0.0);
  }
}

TEST_CASE("linear interpolation by hand") {
  auto tent = Signal::build(std::vector<double>{0, 0.5, 1}, column({0, 1, 0}));
  CHECK(tent.eval(0.25)[0] == doctest::Approx(0.5));
  CHECK(tent.eval_derivative(0.5)[0] == -2.0);
  CHECK(tent.eval_derivative(0.25)[0] == 2.0);
  CHECK(tent.eval_derivative(1.0)[0] == -2.0);
  CHECK(tent.eval_second_derivative(0.25)[0] == 0.0);

  auto ramp = Signal::build(std::vector<double>{0, 1}, column({0, 2}));
  CHECK(ramp.eval(0.75)[0] == doctest::Approx(1.5));
  for (double t : {0.0, 0.4, 1.0}) CHECK(ramp.eval_derivative(t)[0] == 2.0);
}

TEST_CASE("eval outside the unit interval throws") {
  auto s = Signal::build(std::vector<double>{0, 1}, column({0, 2}));
  CHECK_THROWS_AS(s.eval(-0.01), ValidationError);
  CHECK_THROWS_AS(s.eval_derivative(1.01), ValidationError);
}

TEST_CASE("exact at samples in both modes") {
  std::mt19937_64 rng(11);
  for (auto mode : {Interpolation::linear, Interpolation::cubic_natural}) {
    std::uniform_real_distribution<double> gap(0.1, 1.0);
    std::vector<double> t{0.0};
    for (int i = 1; i < 9; ++i) t.push_back(t.back() + gap(rng));
    Eigen::MatrixXd obs = testing::random_matrix(rng, 9, 3);
    auto s = Signal::build(t, obs, mode);
    for (std::size_t k = 0; k < s.size(); ++k) {
      CHECK((s.eval(s.times()[k]) - obs.row(k).transpose()).norm() == 0.0);
    }
  }
}

TEST_CASE("natural spline through collinear points is the line") {
  auto cubic = Signal::build(std::vector<double>{0, 0.3, 1}, column({1, 1.6, 3}),
                             Interpolation::cubic_natural);
  auto linear = Signal::build(std::vector<double>{0, 0.3, 1}, column({1, 1.6, 3}));
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    CHECK(cubic.eval(t)[0] == doctest::Approx(linear.eval(t)[0]).epsilon(1e-12));
    CHECK(cubic.eval_derivative(t)[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("linear mode is affine between samples") {
  std::mt19937_64 rng(5);
  auto s = testing::smooth_signal(rng, 7, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s.times()[k], b = s.times()[k + 1];
    for (int r = 0; r < 5; ++r) {
      const double w = u(rng);
      Eigen::VectorXd mid = s.eval(a + w * (b - a));
      Eigen::VectorXd blend = (1 - w) * s.eval(a) + w * s.eval(b);
      CHECK((mid - blend).norm() < 1e-12);
      CHECK((s.eval_derivative(a + w * (b - a)) - s.eval_derivative(a)).norm() < 1e-12);
    }
  }
}

TEST_CASE("derivative matches central differences away from samples") {
  std::mt19937_64 rng(7);
  const double h = 1e-5;
  for (auto mode : {Interpolation::linear, Interpolation::cubic_natural}) {
    auto s = testing::smooth_signal(rng, 12, 2, mode);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < 50; ++r) {
      // Stay at least 2h away from any sample.
      const std::size_t k = static_cast<std::size_t>(u(rng) * (s.size() - 1));
      const double a = s.times()[k], b = s.times()[k + 1];
      const double t = a + 2 * h + u(rng) * (b - a - 4 * h);
      Eigen::VectorXd fd = (s.eval(t + h) - s.eval(t - h)) / (2 * h);
      CHECK((fd - s.eval_derivative(t)).lpNorm<Eigen::Infinity>() < 1e-6);
      if (mode == Interpolation::cubic_natural) {
        Eigen::VectorXd fd2 = (s.eval_derivative(t + h) - s.eval_derivative(t - h)) / (2 * h);
        CHECK((fd2 - s.eval_second_derivative(t)).lpNorm<Eigen::Infinity>() < 1e-5);
      }
    }
  }
}

TEST_CASE("observation adjoint is the transpose of evaluation") {
  std::mt19937_64 rng(9);
  for (auto mode : {Interpolation::linear, Interpolation::cubic_natural}) {
    auto s = testing::smooth_signal(rng, 8, 2, mode);
    std::vector<double> ts{0.0, 0.13, 0.5, 0.77, 1.0};
    Eigen::MatrixXd dv = testing::random_matrix(rng, 2, 5);
    Eigen::MatrixXd dd = testing::random_matrix(rng, 2, 5);
    Eigen::MatrixXd adj = s.observation_adjoint(ts, dv, dd);

    // <adj, delta> must equal the change in sum <dv_q, eval(t_q)> + <dd_q, eval'(t_q)>.
    auto pairing = [&](const Eigen::MatrixXd& obs) {
      auto p = Signal::build(s.times(), obs, mode);
      double acc = 0.0;
      for (std::size_t q = 0; q < ts.size(); ++q) {
        acc += dv.col(q).dot(p.eval(ts[q])) + dd.col(q).dot(p.eval_derivative(ts[q]));
      }
      return acc;
    };
    Eigen::MatrixXd delta = testing::random_matrix(rng, 8, 2);
    const double lhs = (adj.array() * delta.array()).sum();
    const double rhs = pairing(s.observations() + delta) - pairing(s.observations());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("interpolation names round-trip") {
  CHECK(parse_interpolation("linear") == Interpolation::linear);
  CHECK(parse_interpolation(to_string(Interpolation::cubic_natural)) == Interpolation::cubic_natural);
  CHECK_THROWS_AS(parse_interpolation("quintic"), ValidationError);
}
