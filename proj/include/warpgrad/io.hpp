#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "warpgrad/learn.hpp"
#include "warpgrad/signal.hpp"

namespace warpgrad {

/// A series read from disk. JSON files may carry an interpolation mode and units.
struct SeriesFile {
  Series series;
  std::optional<Interpolation> interpolation;
  std::string units;
};

/// CSV: header row, then `time,f1,...,fd` per line. Blank lines are skipped.
/// Errors name the source and line.
SeriesFile parse_series_csv(std::string_view text, std::string_view source = "<csv>");

/// JSON: {"times": [...], "values": [[...], ...], "interpolation": "linear", "units": "ms"}.
/// `values` may also be a flat array for d = 1.
SeriesFile parse_series_json(std::string_view text, std::string_view source = "<json>");

/// Dispatches on the extension (.json, otherwise CSV).
SeriesFile read_series(const std::filesystem::path& path);

void write_series_csv(const std::filesystem::path& path, const Series& s);

/// A warp as stored by `warpgrad align`: normalized knots/values (exact) and the
/// same curve in original time units.
struct WarpRecord {
  std::vector<double> knots;   // [0, 1]
  std::vector<double> values;  // [0, 1]
  std::vector<double> knots_original;
  std::vector<double> values_original;
  TimeAxis x_axis;
  TimeAxis y_axis;
};

/// JSON produced by align, or a CSV with header and two columns (t, phi) in
/// original units.
WarpRecord read_warp(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace warpgrad
