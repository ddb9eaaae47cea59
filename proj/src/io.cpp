#include "warpgrad/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "warpgrad/errors.hpp"

namespace warpgrad {

namespace {

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

using nlohmann::json;

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view field, std::string_view source, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
    throw ValidationError(where(source, line) + "cannot parse number '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw ValidationError(where(source, line) + "non-finite value '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Rows of a numeric CSV with a mandatory header; returns rows and their line numbers.
std::vector<std::vector<double>> parse_table(std::string_view text, std::string_view source,
                                             std::size_t min_columns,
                                             std::vector<std::size_t>* lines_out = nullptr) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto fields = split(line);
    if (!header) {
      header = true;
      columns = fields.size();
      if (columns < min_columns) {
        throw ValidationError(where(source, line_no) + "header needs at least " +
                              std::to_string(min_columns) + " columns");
      }
      continue;
    }
    if (fields.size() != columns) {
      throw ValidationError(where(source, line_no) + "expected " + std::to_string(columns) +
                            " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(columns);
    for (const auto f : fields) row.push_back(parse_number(f, source, line_no));
    rows.push_back(std::move(row));
    if (lines_out) lines_out->push_back(line_no);
  }
  if (!header) throw ValidationError(std::string(source) + ": empty file (header row required)");
  return rows;
}

}  // namespace

SeriesFile parse_series_csv(std::string_view text, std::string_view source) {
  std::vector<std::size_t> lines;
  const auto rows = parse_table(text, source, 2, &lines);
  if (rows.size() < 2) throw ValidationError(std::string(source) + ": need at least 2 samples");
  SeriesFile out;
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  out.series.values.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r > 0 && !(rows[r][0] > rows[r - 1][0])) {
      throw ValidationError(where(source, lines[r]) + "time " + format_number(rows[r][0]) +
                            " is not greater than the previous time");
    }
    out.series.times.push_back(rows[r][0]);
    for (Eigen::Index c = 0; c < d; ++c) {
      out.series.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c + 1)];
    }
  }
  return out;
}

SeriesFile parse_series_json(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
  const std::string src(source);
  if (!doc.is_object() || !doc.contains("times") || !doc.contains("values")) {
    throw ValidationError(src + ": expected an object with 'times' and 'values'");
  }
  SeriesFile out;
  try {
    out.series.times = doc.at("times").get<std::vector<double>>();
    const json& values = doc.at("values");
    const auto n = static_cast<Eigen::Index>(values.size());
    if (n != static_cast<Eigen::Index>(out.series.times.size())) {
      throw ValidationError(src + ": 'times' and 'values' differ in length");
    }
    if (n == 0) throw ValidationError(src + ": empty series");
    if (values.front().is_array()) {
      const auto d = static_cast<Eigen::Index>(values.front().size());
      out.series.values.resize(n, d);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = values[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != d) {
          throw ValidationError(src + ": values[" + std::to_string(r) + "] has " +
                                std::to_string(row.size()) + " entries, expected " +
                                std::to_string(d));
        }
        for (Eigen::Index c = 0; c < d; ++c) out.series.values(r, c) = row[static_cast<std::size_t>(c)];
      }
    } else {
      const auto flat = values.get<std::vector<double>>();
      out.series.values = Eigen::Map<const Eigen::VectorXd>(flat.data(), n);
    }
    if (doc.contains("interpolation")) {
      out.interpolation = parse_interpolation(doc.at("interpolation").get<std::string>());
    }
    if (doc.contains("units")) out.units = doc.at("units").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(src + ": " + e.what());
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

SeriesFile read_series(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (path.extension() == ".json") return parse_series_json(text, path.string());
  return parse_series_csv(text, path.string());
}

void write_series_csv(const std::filesystem::path& path, const Series& s) {
  std::ostringstream out;
  out.precision(17);
  out << "time";
  for (Eigen::Index c = 0; c < s.values.cols(); ++c) out << ",f" << c;
  out << '\n';
  for (std::size_t r = 0; r < s.times.size(); ++r) {
    out << s.times[r];
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
      out << ',' << s.values(static_cast<Eigen::Index>(r), c);
    }
    out << '\n';
  }
  write_text(path, out.str());
}

namespace {

TimeAxis axis_from(const json& j) {
  return {j.at("offset").get<double>(), j.at("scale").get<double>()};
}

}  // namespace

WarpRecord read_warp(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const std::string src = path.string();
  WarpRecord rec;
  if (path.extension() == ".json") {
    try {
      const json doc = json::parse(text);
      rec.knots_original = doc.at("knots_original_units").get<std::vector<double>>();
      rec.values_original = doc.at("values_original_units").get<std::vector<double>>();
      if (doc.contains("domain_normalization")) {
        rec.x_axis = axis_from(doc.at("domain_normalization").at("x"));
        rec.y_axis = axis_from(doc.at("domain_normalization").at("y"));
      }
      if (doc.contains("knots") && doc.contains("values")) {
        rec.knots = doc.at("knots").get<std::vector<double>>();
        rec.values = doc.at("values").get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw ValidationError(src + ": " + e.what());
    }
  } else {
    const auto rows = parse_table(text, src, 2);
    for (const auto& row : rows) {
      if (row.size() != 2) throw ValidationError(src + ": warp CSV needs exactly two columns");
      rec.knots_original.push_back(row[0]);
      rec.values_original.push_back(row[1]);
    }
  }
  if (rec.knots_original.size() < 2 || rec.knots_original.size() != rec.values_original.size()) {
    throw ValidationError(src + ": warp needs >= 2 knots and one value per knot");
  }
  if (rec.knots.empty()) {
    const double t0 = rec.knots_original.front();
    const double span = rec.knots_original.back() - t0;
    if (!(span > 0.0)) throw ValidationError(src + ": warp knots must be increasing");
    rec.x_axis = {t0, span};
    for (const double t : rec.knots_original) rec.knots.push_back(rec.x_axis.to_unit(t));
    rec.knots.back() = 1.0;
    rec.values = rec.values_original;
  }
  return rec;
}

}  // namespace warpgrad
