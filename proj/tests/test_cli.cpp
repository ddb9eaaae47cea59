#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "helpers.hpp"
#include "warpgrad/commands.hpp"
#include "warpgrad/dp_solver.hpp"
#include "warpgrad/io.hpp"
#include "warpgrad/metrics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace warpgrad;

namespace {

struct Run {
  int code;
  std::string out;
};

std::string cli() {
  const char* p = std::getenv("WARPGRAD_CLI");
  REQUIRE(p != nullptr);
  return p;
}

fs::path data(const std::string& name) {
  const char* p = std::getenv("WARPGRAD_TEST_DATA");
  REQUIRE(p != nullptr);
  return fs::path(p) / name;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "warpgrad_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

// Runs a shell command; stderr goes to `err` when given, else is discarded.
Run run(const std::string& args, const std::string& err = "") {
  const std::string cmd =
      cli() + " " + args + " 2>" + (err.empty() ? std::string("/dev/null") : err);
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("align identical files gives the identity") {
  auto r = run("align " + q(data("x.csv")) + " " + q(data("x_copy.csv")));
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["mode"] == "gdtw");
  CHECK(doc["objective"].get<double>() < 1e-20);
  auto knots = doc["knots_original_units"].get<std::vector<double>>();
  auto values = doc["values_original_units"].get<std::vector<double>>();
  REQUIRE(knots.size() == 40);
  for (std::size_t i = 0; i < knots.size(); ++i) CHECK(values[i] == doctest::Approx(knots[i]));
  CHECK(knots.back() == doctest::Approx(390.0));
  CHECK(doc["domain_normalization"]["x"]["scale"].get<double>() == doctest::Approx(390.0));
  CHECK(doc["interpolation"] == "linear");
  CHECK(doc["endpoints"] == "pinned");
  CHECK(doc.contains("diagnostics"));
  CHECK(doc["iterations"].size() == 3);
}

TEST_CASE("dtw mode writes a discrete path") {
  auto r = run("align --mode dtw " + q(data("x.csv")) + " " + q(data("x_copy.csv")));
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["mode"] == "dtw");
  CHECK(doc["cost"].get<double>() == 0.0);
  auto path = doc["path"];
  REQUIRE(path.size() == 40);
  CHECK(path[0] == json::array({0, 0}));
  CHECK(path[39] == json::array({39, 39}));
}

TEST_CASE("band shorthand") {
  Eigen::VectorXd knots(4);
  knots << 0.0, 0.05, 0.5, 1.0;
  auto [lo, hi] = band_bounds(knots, 0.1);
  CHECK(lo == Eigen::Vector4d(0.0, 0.0, 0.4, 0.9));
  CHECK(hi[0] == doctest::Approx(0.1));
  CHECK(hi[1] == doctest::Approx(0.15));
  CHECK(hi[2] == doctest::Approx(0.6));
  CHECK(hi[3] == 1.0);

  auto r = run("align --band 0.02 " + q(data("x.csv")) + " " + q(data("y_warped.csv")));
  REQUIRE(r.code == 0);
  auto doc = json::parse(r.out);
  auto k = doc["knots"].get<std::vector<double>>();
  auto v = doc["values"].get<std::vector<double>>();
  for (std::size_t i = 0; i < k.size(); ++i) CHECK(std::abs(v[i] - k[i]) <= 0.02 + 1e-9);
}

TEST_CASE("align output round-trips through eval exactly") {
  const fs::path out = scratch("roundtrip.json");
  auto r = run("align " + q(data("x.csv")) + " " + q(data("y_warped.csv")) + " -o " + q(out));
  REQUIRE(r.code == 0);

  // Same solve in memory.
  auto xs = read_series(data("x.csv")).series;
  auto ys = read_series(data("y_warped.csv")).series;
  auto x = Signal::build(xs.times, xs.values);
  auto y = Signal::build(ys.times, ys.values);
  GdtwProblem p(x, y, 0.1, default_constraints(uniform_knots(40), EndpointMode::pinned));
  auto sol = solve(p);

  auto rec = read_warp(out);
  REQUIRE(rec.values.size() == 40);
  for (Eigen::Index i = 0; i < 40; ++i) CHECK(rec.values[i] == sol.warp.values()[i]);

  auto e = run("eval " + q(out) + " " + q(out));
  REQUIRE(e.code == 0);
  auto doc = json::parse(e.out);
  CHECK(doc["time_err"].get<double>() == 0.0);
  CHECK(doc["time_dev"].get<double>() == 0.0);
  CHECK(doc["coverage"].get<double>() == 1.0);
}

TEST_CASE("eval fixtures") {
  auto same = json::parse(run("eval " + q(data("gt_identity.csv")) + " " + q(data("gt_identity.csv"))).out);
  CHECK(same["time_err"].get<double>() == 0.0);
  CHECK(same["time_dev"].get<double>() == 0.0);

  auto off = json::parse(run("eval " + q(data("pred_offset.csv")) + " " + q(data("gt_identity.csv"))).out);
  CHECK(off["time_err"].get<double>() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(off["time_dev"].get<double>() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("eval of generated warps matches quadrature") {
  std::mt19937_64 rng(97);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 3; ++r) {
    auto make = [&](const fs::path& path, int m) {
      std::vector<double> t(m), v(m);
      for (int i = 0; i < m; ++i) {
        t[i] = 1000.0 * i / (m - 1);
        v[i] = 1000.0 * u(rng);
      }
      std::sort(v.begin(), v.end());
      std::ofstream f(path);
      f.precision(17);
      f << "t,phi\n";
      for (int i = 0; i < m; ++i) f << t[i] << ',' << v[i] << '\n';
      return WarpFunction(Eigen::Map<Eigen::VectorXd>(t.data(), m) / 1000.0,
                          Eigen::Map<Eigen::VectorXd>(v.data(), m));
    };
    auto a = make(scratch("gen_a.csv"), 9);
    auto b = make(scratch("gen_b.csv"), 6);
    const int n = 100001;
    double e = 0.0, d = 0.0;
    for (int k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / (n - 1);
      const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
      const double diff = a(s) - b(s);
      e += w * std::abs(diff);
      d += w * diff * diff;
    }
    e /= n - 1;
    d = std::sqrt(d / (n - 1));
    auto doc = json::parse(run("eval " + q(scratch("gen_a.csv")) + " " + q(scratch("gen_b.csv"))).out);
    CHECK(doc["time_err"].get<double>() == doctest::Approx(e).epsilon(1e-8));
    CHECK(doc["time_dev"].get<double>() == doctest::Approx(d).epsilon(1e-8));
  }
}

TEST_CASE("exit codes") {
  const fs::path err = scratch("stderr.txt");
  CHECK(run("align " + q(data("bad_order.csv")) + " " + q(data("x.csv")), err.string()).code == 2);
  CHECK(slurp(err).find("bad_order.csv:5:") != std::string::npos);
  CHECK(run("align " + q(data("not_numbers.csv")) + " " + q(data("x.csv")), err.string()).code == 2);
  CHECK(slurp(err).find("not_numbers.csv:3:") != std::string::npos);
  CHECK(run("align " + q(data("missing.csv")) + " " + q(data("x.csv"))).code == 2);
  CHECK(run("align --no-such-flag").code == 2);
  CHECK(run("align --constraints " + q(data("tight_slopes.json")) + " " + q(data("x.csv")) + " " +
            q(data("x_copy.csv")))
            .code == 3);
  CHECK(run("gradcheck --instances 0").code == 2);
}

TEST_CASE("json series input") {
  auto s = read_series(data("series.json"));
  CHECK(s.units == "s");
  REQUIRE(s.interpolation.has_value());
  CHECK(*s.interpolation == Interpolation::cubic_natural);
  CHECK(s.series.values.rows() == 5);
  auto r = run("align " + q(data("series.json")) + " " + q(data("series.json")));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["interpolation"] == "cubic-natural");
}

TEST_CASE("align is deterministic") {
  auto a = json::parse(run("align " + q(data("x.csv")) + " " + q(data("y_warped.csv"))).out);
  auto b = json::parse(run("align " + q(data("x.csv")) + " " + q(data("y_warped.csv"))).out);
  a.erase("wall_time_s");
  b.erase("wall_time_s");
  CHECK(a == b);
}

TEST_CASE("batch mode") {
  const fs::path out = scratch("batch_out");
  fs::remove_all(out);
  const fs::path log = scratch("batch_log.txt");
  auto r = run("align --batch " + q(data("batch")) + " -o " + q(out), log.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "first.json"));
  CHECK(fs::exists(out / "second.json"));
  CHECK(!fs::exists(out / "orphan.json"));
  CHECK(slurp(log).find("orphan: missing y file") != std::string::npos);
  CHECK(json::parse(slurp(out / "second.json"))["objective"].get<double>() < 1e-20);

  CHECK(std::system(("WARPGRAD_THREADS=0 " + cli() + " align --batch " + q(data("batch")) + " -o " +
                     q(out) + " 2>/dev/null")
                        .c_str()) != 0);
}

TEST_CASE("bench table format") {
  std::vector<BenchRow> rows{{64, 0.125, 2.5, 7.25, 0.5}, {128, 0.5, 10.0, 29.0, 1.0}};
  CHECK(format_bench_table(rows) == slurp(data("bench_golden.txt")));

  auto r = run("bench --sizes 16,32 --repeats 1 --knots 8");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header + "\n" == format_bench_table({}));
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 2);
}

TEST_CASE("train writes a loss history") {
  const fs::path out = scratch("history.csv");
  auto r = run("train --pairs 2 --samples 20 --steps 3 -o " + q(out));
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(out));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "step,loss,grad_norm");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("gradcheck command") {
  auto r = run("gradcheck --instances 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("damp") != std::string::npos);
}
