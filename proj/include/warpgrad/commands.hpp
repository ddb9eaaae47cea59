#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/dp_solver.hpp"
#include "warpgrad/learn.hpp"

namespace warpgrad {

enum class ExitCode { ok = 0, failure = 1, validation = 2, infeasible = 3, numerical = 4 };

/// Sakoe-Chiba band as per-knot value bounds: [max(0, t - w), min(1, t + w)].
std::pair<Eigen::VectorXd, Eigen::VectorXd> band_bounds(const Eigen::VectorXd& knots, double width);

struct AlignRequest {
  std::filesystem::path x_path;
  std::filesystem::path y_path;
  std::string mode = "gdtw";  // gdtw | dtw
  double lambda = 0.1;
  int resolution = 0;
  double eta = 0.125;
  int iterations = 3;
  bool polish = true;
  int knots = 0;  // 0: one knot per sample of x
  std::optional<Interpolation> interpolation;  // default: from file, else linear
  double s_min = 0.0;
  double s_max = kUnboundedSlope;
  std::optional<double> band;
  std::optional<std::filesystem::path> constraints_path;  // JSON arrays s_min, s_max, b_min, b_max
  bool subsequence = false;
  std::optional<std::filesystem::path> output;
};

/// Aligns one pair and returns the JSON result.
std::string align_json(const AlignRequest& req);

/// Writes the result to req.output or `out`.
ExitCode cmd_align(const AlignRequest& req, std::ostream& out);

/// Aligns every `<name>.x.<ext>` / `<name>.y.<ext>` pair in `dir`, writing
/// `<name>.json` into `out_dir`. Worker count: WARPGRAD_THREADS if set, else
/// the hardware concurrency.
ExitCode cmd_align_batch(const AlignRequest& base, const std::filesystem::path& dir,
                         const std::filesystem::path& out_dir, std::ostream& log);

ExitCode cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
                  std::ostream& out);

ExitCode cmd_gradcheck(std::uint64_t seed, int instances, int knots, std::ostream& out);

struct BenchRow {
  int n = 0;
  double dtw_ms = 0.0;
  double gdtw1_ms = 0.0;  // forward, iters = 1
  double gdtw3_ms = 0.0;  // forward, iters = 3
  double backward_ms = 0.0;
};

std::string format_bench_table(const std::vector<BenchRow>& rows);
std::vector<BenchRow> run_bench(const std::vector<int>& sizes, int repeats, int knots);
ExitCode cmd_bench(const std::vector<int>& sizes, int repeats, int knots, std::ostream& out);

struct TrainRequest {
  std::uint64_t seed = 0;
  int pairs = 10;
  int samples = 40;
  int d_in = 6;
  int d_out = 4;
  int nuisance = 3;
  double severity = 0.3;
  TrainConfig config;
  std::optional<std::filesystem::path> output;  // loss history CSV
};

ExitCode cmd_train(const TrainRequest& req, std::ostream& out);

}  // namespace warpgrad
