#include "warpgrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "warpgrad/errors.hpp"

namespace warpgrad {

SolverOptions accurate_solver() {
  SolverOptions o;
  o.resolution = 200;
  o.iterations = 5;
  o.backend = kernels::Backend::serial;
  return o;
}

namespace {

Eigen::MatrixXd smooth_samples(std::mt19937_64& rng, const std::vector<double>& times, int dims) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(times.size()), dims);
  for (int c = 0; c < dims; ++c) {
    double amp[3], freq[3], phase[3];
    for (int h = 0; h < 3; ++h) {
      amp[h] = normal(rng) / (h + 1);
      freq[h] = (h + 1) * (0.5 + 0.5 * unit(rng));
      phase[h] = 2.0 * std::numbers::pi * unit(rng);
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      double v = 0.0;
      for (int h = 0; h < 3; ++h) v += amp[h] * std::sin(2.0 * std::numbers::pi * freq[h] * times[i] + phase[h]);
      out(static_cast<Eigen::Index>(i), c) = v;
    }
  }
  return out;
}

std::vector<double> uniform_times(int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return t;
}

ConstraintSet rebuild(const ConstraintSet& c, Eigen::VectorXd s_min, Eigen::VectorXd s_max,
                      Eigen::VectorXd b_min, Eigen::VectorXd b_max) {
  return make_constraints(c.knots, s_min, s_max, b_min, b_max, c.endpoints);
}

}  // namespace

bool strictly_complementary(const GdtwProblem& p, const WarpFunction& w, double slack_tol,
                            double mu_tol) {
  const ConstraintSet& c = p.constraints();
  const std::vector<Eigen::Index> near = near_active_constraints(w, c);
  const ActiveSet active = prune_active_set(near, c.knot_count());
  if (!active.pruned.empty()) return false;
  const Eigen::VectorXd h = constraint_residuals(w, c);
  for (Eigen::Index j = 0; j < h.size(); ++j) {
    if (std::find(near.begin(), near.end(), j) != near.end()) continue;
    if (!(h[j] < -slack_tol)) return false;
  }
  const Eigen::VectorXd mu = active_multipliers(p, w, active);
  return mu.size() == 0 || mu.minCoeff() > mu_tol;
}

std::optional<Instance> random_instance(std::uint64_t seed, const InstanceSpec& spec) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<double> times = uniform_times(spec.samples);
  const Eigen::MatrixXd xs = smooth_samples(rng, times, spec.dims);
  Eigen::MatrixXd ys = smooth_samples(rng, times, spec.dims);
  ys = 0.3 * ys + 0.7 * xs;  // related but not identical
  const Signal x = Signal::build(times, xs, spec.interpolation);
  const Signal y = Signal::build(times, ys, spec.interpolation);

  const Eigen::Index m = spec.knots;
  const Eigen::VectorXd knots = uniform_knots(m);
  Eigen::VectorXd s_min = Eigen::VectorXd::Constant(m - 1, 0.05);
  Eigen::VectorXd s_max = Eigen::VectorXd::Constant(m - 1, 20.0);
  Eigen::VectorXd b_min = Eigen::VectorXd::Constant(m, 0.001);
  Eigen::VectorXd b_max = Eigen::VectorXd::Constant(m, 0.999);
  const SolverOptions solver = accurate_solver();

  const GdtwProblem loose(x, y, spec.lambda,
                          make_constraints(knots, s_min, s_max, b_min, b_max, EndpointMode::free));
  const WarpSolution base = solve(loose, solver);
  const Eigen::VectorXd& phi = base.warp.values();

  // Cut through the loose optimum so the tightened bounds bind.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int k = 0; k < spec.cuts && k < m; ++k) {
    const Eigen::Index i = order[static_cast<std::size_t>(k)];
    const double delta = 0.01 + 0.03 * unit(rng);
    switch (k % 4) {
      case 0:
        b_max[i] = std::clamp(phi[i] - delta, 0.01, 0.99);
        break;
      case 1:
        b_min[i] = std::clamp(phi[i] + delta, 0.01, 0.99);
        break;
      case 2:
        if (i + 1 < m) {
          const double slope = (phi[i + 1] - phi[i]) / (knots[i + 1] - knots[i]);
          s_max[i] = std::max(0.1, slope * (0.6 + 0.2 * unit(rng)));
        }
        break;
      case 3:
        if (i + 1 < m) {
          const double slope = (phi[i + 1] - phi[i]) / (knots[i + 1] - knots[i]);
          s_min[i] = std::min(10.0, slope * (1.3 + 0.3 * unit(rng)) + 0.2);
        }
        break;
    }
  }
  try {
    GdtwProblem p(x, y, spec.lambda,
                  make_constraints(knots, s_min, s_max, b_min, b_max, EndpointMode::free));
    WarpSolution sol = solve(p, solver);
    if (sol.kkt > 1e-8 || !strictly_complementary(p, sol.warp)) return std::nullopt;
    return Instance{std::move(p), std::move(sol)};
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
}

GdtwProblem perturb_input(const GdtwProblem& p, Eigen::Index k, double delta) {
  const InputLayout l = input_layout(p);
  if (k < 0 || k >= l.total) throw ValidationError("perturb_input: index out of range");
  const Eigen::Index d = p.x().dimension();
  const ConstraintSet& c = p.constraints();
  if (k < l.y) {
    Eigen::MatrixXd obs = p.x().observations();
    obs((k - l.x) / d, (k - l.x) % d) += delta;
    return GdtwProblem(Signal::build(p.x().times(), obs, p.x().interpolation()), p.y(), p.lambda(),
                       c);
  }
  if (k < l.lambda) {
    Eigen::MatrixXd obs = p.y().observations();
    obs((k - l.y) / d, (k - l.y) % d) += delta;
    return GdtwProblem(p.x(), Signal::build(p.y().times(), obs, p.y().interpolation()), p.lambda(),
                       c);
  }
  if (k == l.lambda) return p.with_lambda(p.lambda() + delta);
  Eigen::VectorXd s_min = c.s_min, s_max = c.s_max, b_min = c.b_min, b_max = c.b_max;
  if (k < l.s_max) {
    s_min[k - l.s_min] += delta;
  } else if (k < l.b_min) {
    s_max[k - l.s_max] += delta;
  } else if (k < l.b_max) {
    b_min[k - l.b_min] += delta;
  } else {
    b_max[k - l.b_max] += delta;
  }
  return GdtwProblem(p.x(), p.y(), p.lambda(), rebuild(c, s_min, s_max, b_min, b_max));
}

double agreement_ratio(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rtol,
                       double atol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double allowed = std::max(rtol * std::max(std::abs(a[i]), std::abs(b[i])), atol);
    worst = std::max(worst, std::abs(a[i] - b[i]) / allowed);
  }
  return worst;
}

namespace {

const char* kBlockNames[] = {"X", "Y", "lambda", "s_min", "s_max", "b_min", "b_max"};

Eigen::VectorXd fd_gradient(const Eigen::VectorXd& v, const GdtwProblem& p, double h) {
  const InputLayout l = input_layout(p);
  const SolverOptions solver = accurate_solver();
  Eigen::VectorXd g(l.total);
  for (Eigen::Index k = 0; k < l.total; ++k) {
    const WarpSolution plus = solve(perturb_input(p, k, h), solver);
    const WarpSolution minus = solve(perturb_input(p, k, -h), solver);
    g[k] = v.dot(plus.warp.values() - minus.warp.values()) / (2.0 * h);
  }
  return g;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  std::vector<double> worst(7, 0.0);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  InstanceSpec spec;
  spec.knots = options.knots;

  std::uint64_t draw = options.seed * 1000003ULL;
  int attempts = 0;
  while (report.instances_checked < options.instances && attempts < 50 * options.instances) {
    ++attempts;
    const auto inst = random_instance(draw++, spec);
    if (!inst) continue;
    const GdtwProblem& p = inst->problem;
    const Eigen::Index m = p.knot_count();
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = normal(rng);

    const Eigen::VectorXd fast = vjp(v, p, inst->solution).flatten();
    if (m <= 20) {
      const Eigen::VectorXd dense = jacobian_dense(p, inst->solution).transpose() * v;
      const double rel = (fast - dense).norm() / std::max(dense.norm(), 1e-300);
      report.worst_dense = std::max(report.worst_dense, rel);
    }
    const Eigen::VectorXd fd = fd_gradient(v, p, options.fd_step);
    const InputLayout l = input_layout(p);
    const Eigen::Index starts[] = {l.x, l.y, l.lambda, l.s_min, l.s_max, l.b_min, l.b_max, l.total};
    for (int b = 0; b < 7; ++b) {
      const Eigen::Index n = starts[b + 1] - starts[b];
      worst[static_cast<std::size_t>(b)] =
          std::max(worst[static_cast<std::size_t>(b)],
                   agreement_ratio(fast.segment(starts[b], n), fd.segment(starts[b], n), 1e-3, 1e-6));
    }
    ++report.instances_checked;
  }
  if (report.instances_checked < options.instances) {
    report.notes.push_back("only " + std::to_string(report.instances_checked) +
                           " strictly complementary instances found");
    report.passed = false;
  }

  // lambda = 0 with a flat y: H vanishes and the damping path is taken.
  {
    const std::vector<double> t{0.0, 0.5, 1.0};
    const Signal x = Signal::build(t, Eigen::Vector3d(0.0, 1.0, 0.0));
    const Signal y = Signal::build(t, Eigen::Vector3d(2.0, 2.0, 2.0));
    const Eigen::VectorXd knots = uniform_knots(5);
    const GdtwProblem p(x, y, 0.0, default_constraints(knots, EndpointMode::pinned));
    const WarpSolution sol = solve(p);
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(5);
    const WarpGradient g = vjp(v, p, sol);
    const bool damped = std::any_of(g.diagnostics.begin(), g.diagnostics.end(), [](const std::string& s) {
      return s.find("damped") != std::string::npos;
    });
    const Eigen::VectorXd dense = jacobian_dense(p, sol).transpose() * v;
    // H^{-1} is ~1e8 here, so both routes carry ~1e-8 round-off.
    const double rel = (g.flatten() - dense).norm() / std::max(dense.norm(), 1.0);
    if (!damped || !g.flatten().allFinite() || rel > 1e-6) {
      report.passed = false;
      report.notes.push_back("lambda = 0 flat-signal case failed");
    } else {
      report.notes.push_back("lambda = 0 flat-signal case: Hessian damped, gradient finite");
    }
  }

  for (int b = 0; b < 7; ++b) {
    report.worst_fd.emplace_back(kBlockNames[b], worst[static_cast<std::size_t>(b)]);
    if (worst[static_cast<std::size_t>(b)] > 1.0) report.passed = false;
  }
  if (report.worst_dense > 1e-10) report.passed = false;
  return report;
}

}  // namespace warpgrad
