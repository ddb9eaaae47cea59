#include "warpgrad/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "warpgrad/classic_dtw.hpp"
#include "warpgrad/errors.hpp"
#include "warpgrad/gradcheck.hpp"
#include "warpgrad/implicit_grad.hpp"
#include "warpgrad/io.hpp"
#include "warpgrad/metrics.hpp"

namespace warpgrad {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json axis_json(const TimeAxis& a) { return {{"offset", a.offset}, {"scale", a.scale}}; }

Eigen::VectorXd read_array(const json& doc, const char* key, Eigen::Index expected,
                           const std::string& src) {
  const auto v = doc.at(key).get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != expected) {
    throw ValidationError(src + ": '" + key + "' has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(expected));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), expected);
}

ConstraintSet request_constraints(const AlignRequest& req, const Eigen::VectorXd& knots) {
  const Eigen::Index m = knots.size();
  if (!(req.s_min <= req.s_max)) throw ValidationError("s_min must not exceed s_max");
  Eigen::VectorXd s_min = Eigen::VectorXd::Constant(m - 1, req.s_min);
  Eigen::VectorXd s_max = Eigen::VectorXd::Constant(m - 1, req.s_max);
  Eigen::VectorXd b_min = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd b_max = Eigen::VectorXd::Ones(m);
  if (req.band) std::tie(b_min, b_max) = band_bounds(knots, *req.band);
  if (req.constraints_path) {
    const std::string src = req.constraints_path->string();
    try {
      const json doc = json::parse(read_text(*req.constraints_path));
      if (doc.contains("s_min")) s_min = read_array(doc, "s_min", m - 1, src);
      if (doc.contains("s_max")) s_max = read_array(doc, "s_max", m - 1, src);
      if (doc.contains("b_min")) b_min = read_array(doc, "b_min", m, src);
      if (doc.contains("b_max")) b_max = read_array(doc, "b_max", m, src);
    } catch (const json::exception& e) {
      throw ValidationError(src + ": " + e.what());
    }
  }
  const EndpointMode endpoints = req.subsequence ? EndpointMode::free : EndpointMode::pinned;
  if (endpoints == EndpointMode::pinned) {
    b_min[0] = b_max[0] = 0.0;
    b_min[m - 1] = b_max[m - 1] = 1.0;
  }
  return make_constraints(knots, s_min, s_max, b_min, b_max, endpoints);
}

ExitCode exit_code_for(std::exception_ptr error, std::string& message) {
  try {
    std::rethrow_exception(error);
  } catch (const ValidationError& e) {
    message = e.what();
    return ExitCode::validation;
  } catch (const InfeasibleError& e) {
    message = e.what();
    return ExitCode::infeasible;
  } catch (const NumericalError& e) {
    message = e.what();
    return ExitCode::numerical;
  } catch (const std::exception& e) {
    message = e.what();
    return ExitCode::failure;
  }
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> band_bounds(const Eigen::VectorXd& knots,
                                                         double width) {
  if (!(width >= 0.0)) throw ValidationError("band width must be >= 0");
  Eigen::VectorXd lo(knots.size()), hi(knots.size());
  for (Eigen::Index i = 0; i < knots.size(); ++i) {
    lo[i] = std::max(0.0, knots[i] - width);
    hi[i] = std::min(1.0, knots[i] + width);
  }
  return {lo, hi};
}

std::string align_json(const AlignRequest& req) {
  const SeriesFile xf = read_series(req.x_path);
  const SeriesFile yf = read_series(req.y_path);
  const auto start = Clock::now();
  json out;

  if (req.mode == "dtw") {
    const DiscreteAlignment a = dtw(pairwise_costs(xf.series.values, yf.series.values));
    json path = json::array();
    for (const auto& [i, j] : a.path) path.push_back({i, j});
    out["mode"] = "dtw";
    out["path"] = path;
    out["cost"] = a.cost;
    out["wall_time_s"] = seconds_since(start);
    return out.dump(2);
  }
  if (req.mode != "gdtw") throw ValidationError("unknown mode '" + req.mode + "' (gdtw or dtw)");

  const Interpolation interp =
      req.interpolation.value_or(xf.interpolation.value_or(Interpolation::linear));
  const Signal x = Signal::build(xf.series.times, xf.series.values, interp);
  const Signal y = Signal::build(yf.series.times, yf.series.values, interp);
  const int m = req.knots > 0 ? req.knots : static_cast<int>(x.size());
  if (m < 2) throw ValidationError("need at least 2 knots");
  const Eigen::VectorXd knots = uniform_knots(m);
  if (!(req.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  const GdtwProblem problem(x, y, req.lambda, request_constraints(req, knots));

  SolverOptions opts;
  opts.resolution = req.resolution;
  opts.eta = req.eta;
  opts.iterations = req.iterations;
  opts.polish = req.polish;
  const WarpSolution sol = solve(problem, opts);
  const double wall = seconds_since(start);

  std::vector<double> knots_orig, values_orig;
  for (Eigen::Index i = 0; i < m; ++i) {
    knots_orig.push_back(x.axis().to_original(knots[i]));
    values_orig.push_back(y.axis().to_original(sol.warp.values()[i]));
  }
  json iterations = json::array();
  for (const IterationRecord& r : sol.iterations) {
    iterations.push_back({{"grid_objective", r.grid_objective}, {"objective", r.objective}});
  }
  json diagnostics = json::array();
  if (sol.kkt > 1e-4) {
    diagnostics.push_back("kkt residual " + std::to_string(sol.kkt) +
                          " above 1e-4; increase resolution or enable polish");
  }
  if (sol.polish && !sol.polish->converged) diagnostics.push_back("polish did not converge");

  out["mode"] = "gdtw";
  out["knots"] = to_std(knots);
  out["values"] = to_std(sol.warp.values());
  out["knots_original_units"] = knots_orig;
  out["values_original_units"] = values_orig;
  out["domain_normalization"] = {{"x", axis_json(x.axis())}, {"y", axis_json(y.axis())}};
  out["objective"] = sol.objective_value;
  out["signal_loss"] = sol.signal_loss;
  out["regularization"] = sol.regularization;
  out["lambda"] = req.lambda;
  out["interpolation"] = std::string(to_string(interp));
  out["endpoints"] = std::string(to_string(problem.constraints().endpoints));
  out["active_set"] = sol.active_set;
  out["kkt"] = sol.kkt;
  out["iterations"] = iterations;
  if (sol.polish) {
    out["polish"] = {{"steps", sol.polish->steps},
                     {"objective_before", sol.polish->objective_before},
                     {"objective_after", sol.polish->objective_after},
                     {"converged", sol.polish->converged}};
  }
  out["wall_time_s"] = wall;
  out["diagnostics"] = diagnostics;
  return out.dump(2);
}

ExitCode cmd_align(const AlignRequest& req, std::ostream& out) {
  const std::string text = align_json(req);
  if (req.output) {
    write_text(*req.output, text + "\n");
  } else {
    out << text << '\n';
  }
  return ExitCode::ok;
}

ExitCode cmd_align_batch(const AlignRequest& base, const std::filesystem::path& dir,
                         const std::filesystem::path& out_dir, std::ostream& log) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::map<std::string, std::pair<fs::path, fs::path>> jobs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    const fs::path stem = p.stem();  // name.x
    const std::string role = stem.extension().string();
    if (role == ".x") jobs[stem.stem().string()].first = p;
    if (role == ".y") jobs[stem.stem().string()].second = p;
  }
  std::vector<std::tuple<std::string, fs::path, fs::path>> work;
  for (const auto& [name, paths] : jobs) {
    if (paths.first.empty() || paths.second.empty()) {
      log << name << ": missing " << (paths.first.empty() ? "x" : "y") << " file, skipped\n";
      continue;
    }
    work.emplace_back(name, paths.first, paths.second);
  }
  fs::create_directories(out_dir);

  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WARPGRAD_THREADS")) {
    const int cap = std::atoi(env);
    if (cap < 1) throw ValidationError("WARPGRAD_THREADS must be a positive integer");
    threads = static_cast<unsigned>(cap);
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(work.size(), 1)));

  std::atomic<std::size_t> next{0};
  std::vector<ExitCode> codes(work.size(), ExitCode::ok);
  std::vector<std::string> messages(work.size());
  auto worker = [&] {
    for (std::size_t k = next++; k < work.size(); k = next++) {
      const auto& [name, xp, yp] = work[k];
      AlignRequest req = base;
      req.x_path = xp;
      req.y_path = yp;
      req.output = out_dir / (name + ".json");
      try {
        write_text(*req.output, align_json(req) + "\n");
      } catch (...) {
        codes[k] = exit_code_for(std::current_exception(), messages[k]);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  ExitCode worst = ExitCode::ok;
  for (std::size_t k = 0; k < work.size(); ++k) {
    const std::string& name = std::get<0>(work[k]);
    if (codes[k] == ExitCode::ok) {
      log << name << ": ok\n";
    } else {
      log << name << ": error: " << messages[k] << '\n';
      worst = std::max(worst, codes[k]);
    }
  }
  return worst;
}

ExitCode cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
                  std::ostream& out) {
  const WarpRecord p = read_warp(pred);
  const WarpRecord g = read_warp(gt);
  const AlignmentError e =
      time_err_dev(p.knots_original, p.values_original, g.knots_original, g.values_original);
  json doc;
  doc["time_err"] = e.time_err;
  doc["time_dev"] = e.time_dev;
  doc["coverage"] = e.coverage;
  json diagnostics = json::array();
  if (e.coverage < 1.0) {
    diagnostics.push_back("warp domains differ; metrics cover the intersection only (coverage " +
                          std::to_string(e.coverage) + ")");
  }
  doc["diagnostics"] = diagnostics;
  out << doc.dump(2) << '\n';
  return ExitCode::ok;
}

ExitCode cmd_gradcheck(std::uint64_t seed, int instances, int knots, std::ostream& out) {
  if (instances < 1) throw ValidationError("instances must be >= 1");
  if (knots < 2) throw ValidationError("knots must be >= 2");
  GradcheckOptions o;
  o.seed = seed;
  o.instances = instances;
  o.knots = knots;
  const GradcheckReport r = run_gradcheck(o);
  out << "instances " << r.instances_checked << '\n';
  out << std::scientific << std::setprecision(3);
  out << "vjp vs dense jacobian: worst relative error " << r.worst_dense << '\n';
  for (const auto& [block, ratio] : r.worst_fd) {
    out << "vjp vs finite differences [" << block << "]: worst error / tolerance " << ratio << '\n';
  }
  for (const std::string& note : r.notes) out << "note: " << note << '\n';
  out << (r.passed ? "PASS" : "FAIL") << '\n';
  return r.passed ? ExitCode::ok : ExitCode::failure;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream s;
  char line[256];
  std::snprintf(line, sizeof line, "%8s %12s %12s %12s %12s %10s %10s\n", "n", "dtw_ms",
                "gdtw_it1_ms", "gdtw_it3_ms", "backward_ms", "it1/dtw", "it3/dtw");
  s << line;
  for (const BenchRow& r : rows) {
    const double base = r.dtw_ms > 0.0 ? r.dtw_ms : 1.0;
    std::snprintf(line, sizeof line, "%8d %12.3f %12.3f %12.3f %12.3f %10.2f %10.2f\n", r.n,
                  r.dtw_ms, r.gdtw1_ms, r.gdtw3_ms, r.backward_ms, r.gdtw1_ms / base,
                  r.gdtw3_ms / base);
    s << line;
  }
  return s.str();
}

namespace {

template <typename F>
double min_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    f();
    best = std::min(best, 1e3 * seconds_since(start));
  }
  return best;
}

Eigen::MatrixXd bench_signal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd v(n, 2);
  double a = 0.0, b = 0.0;
  for (int i = 0; i < n; ++i) {
    a = 0.95 * a + 0.3 * normal(rng);
    b = 0.95 * b + 0.3 * normal(rng);
    v(i, 0) = a;
    v(i, 1) = b;
  }
  return v;
}

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<int>& sizes, int repeats, int knots) {
  if (sizes.size() < 2) throw ValidationError("bench needs at least two sizes");
  if (repeats < 1) throw ValidationError("repeats must be >= 1");
  if (knots < 2) throw ValidationError("knots must be >= 2");
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(7);
  for (const int n : sizes) {
    if (n < 2) throw ValidationError("sizes must be >= 2");
    const Eigen::MatrixXd xs = bench_signal(rng, n);
    const Eigen::MatrixXd ys = bench_signal(rng, n);
    std::vector<double> times(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = i;
    const GdtwProblem p(Signal::build(times, xs), Signal::build(times, ys), 0.1,
                        default_constraints(uniform_knots(knots), EndpointMode::pinned));
    const Eigen::MatrixXd costs = pairwise_costs(xs, ys);

    BenchRow row;
    row.n = n;
    row.dtw_ms = min_ms(repeats, [&] { (void)dtw(costs); });
    SolverOptions o;
    o.resolution = n;
    o.polish = false;
    o.iterations = 1;
    row.gdtw1_ms = min_ms(repeats, [&] { (void)solve(p, o); });
    o.iterations = 3;
    WarpSolution sol = solve(p, o);
    row.gdtw3_ms = min_ms(repeats, [&] { sol = solve(p, o); });
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(knots);
    row.backward_ms = min_ms(repeats, [&] { (void)vjp(v, p, sol); });
    rows.push_back(row);
  }
  return rows;
}

ExitCode cmd_bench(const std::vector<int>& sizes, int repeats, int knots, std::ostream& out) {
  out << format_bench_table(run_bench(sizes, repeats, knots));
  return ExitCode::ok;
}

ExitCode cmd_train(const TrainRequest& req, std::ostream& out) {
  if (req.pairs < 1) throw ValidationError("pairs must be >= 1");
  std::vector<TrainingPair> pairs;
  SynthOptions synth;
  synth.nuisance = req.nuisance;
  for (int k = 0; k < req.pairs; ++k) {
    pairs.push_back(synth_pair(req.seed + static_cast<std::uint64_t>(k), req.samples, req.d_in,
                               req.severity, synth));
  }
  const TrainResult r =
      train(pairs, req.config, LinearFeatureMap::random(req.d_out, req.d_in, req.seed));
  std::ostringstream csv;
  csv << std::setprecision(17) << "step,loss,grad_norm\n";
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    csv << k << ',' << r.history[k] << ',';
    if (k < r.gradient_norms.size()) csv << r.gradient_norms[k];
    csv << '\n';
  }
  if (req.output) {
    write_text(*req.output, csv.str());
    out << "initial loss " << r.history.front() << ", final loss " << r.history.back() << '\n';
  } else {
    out << csv.str();
  }
  return ExitCode::ok;
}

}  // namespace warpgrad
