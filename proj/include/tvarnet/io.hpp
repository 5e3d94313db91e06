#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvarnet/admm.hpp"
#include "tvarnet/analysis.hpp"
#include "tvarnet/errors.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/model_selection.hpp"
#include "tvarnet/series.hpp"
#include "tvarnet/simulate.hpp"

namespace tvarnet {

/// Doubles are written with 17 significant digits, which round-trips every
/// finite value bit-exactly.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("failed reading " + path);
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out.good()) throw IoError("failed writing " + path);
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double_field(std::string_view field, const std::string& origin, int line,
                                 int column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ArgumentError(origin + ":" + std::to_string(line) + ": column " +
                        std::to_string(column) + ": cannot parse '" + std::string(field) +
                        "' as a number");
  return value;
}

inline long parse_int_field(std::string_view field, const std::string& origin, int line,
                            int column) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ArgumentError(origin + ":" + std::to_string(line) + ": column " +
                        std::to_string(column) + ": cannot parse '" + std::string(field) +
                        "' as an integer");
  return value;
}

/// Lines of `text` without trailing '\r'; a trailing final newline does not
/// produce an empty last line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Series CSV: header "t,<label_1>,...,<label_P>", one row per instant with a
// 0-based t column (converted to the library's 1-based indexing on load).

inline std::string series_to_csv(const MultivariateSeries& series) {
  std::string out = "t";
  for (const auto& label : series.node_labels) out += "," + label;
  out += "\n";
  for (int t = 1; t <= series.num_samples(); ++t) {
    out += std::to_string(t - 1);
    for (int row = 0; row < series.num_nodes(); ++row)
      out += "," + format_double(series.values(row, t - 1));
    out += "\n";
  }
  return out;
}

inline MultivariateSeries series_from_csv(const std::string& text, const std::string& origin) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ArgumentError(origin + ":1: empty series file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "t")
    throw ArgumentError(origin + ":1: header must be 't,<label_1>,...'");
  std::vector<std::string> labels(header.begin() + 1, header.end());
  const int p = static_cast<int>(labels.size());
  const int t_max = static_cast<int>(lines.size()) - 1;
  if (t_max < 1) throw ArgumentError(origin + ": no sample rows");

  Matrix values(p, t_max);
  for (int r = 1; r <= t_max; ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (static_cast<int>(fields.size()) != p + 1)
      throw ArgumentError(origin + ":" + std::to_string(r + 1) + ": expected " +
                          std::to_string(p + 1) + " fields, got " +
                          std::to_string(fields.size()));
    const long t0 = detail::parse_int_field(fields[0], origin, r + 1, 1);
    if (t0 != r - 1)
      throw ArgumentError(origin + ":" + std::to_string(r + 1) + ": expected t=" +
                          std::to_string(r - 1) + ", got " + std::to_string(t0));
    for (int c = 0; c < p; ++c)
      values(c, r - 1) = detail::parse_double_field(fields[c + 1], origin, r + 1, c + 2);
  }
  return MultivariateSeries(std::move(values), std::move(labels));
}

inline void save_series_csv(const std::string& path, const MultivariateSeries& series) {
  write_text_file(path, series_to_csv(series));
}

inline MultivariateSeries load_series_csv(const std::string& path) {
  return series_from_csv(read_text_file(path), std::filesystem::path(path).filename().string());
}

// ---------------------------------------------------------------------------
// Coefficients JSON:
// {"P":..,"L":..,"T":..,"segment_starts":[..],"coeffs":[segment][l][i][j]}
// segment_starts are 1-based time indices (the first is L+1), matching the
// breakpoints CSV convention. Written with fixed key order and 17-digit
// floats so load -> save is byte-identical.

inline std::string coefficients_to_json(const TvarCoefficients& c) {
  c.validate();
  std::string out = "{\"P\":" + std::to_string(c.num_nodes) + ",\"L\":" + std::to_string(c.order) +
                    ",\"T\":" + std::to_string(c.num_samples) + ",\"segment_starts\":[";
  for (int n = 0; n < c.num_segments(); ++n) {
    if (n) out += ",";
    out += std::to_string(c.segment_starts[n]);
  }
  out += "],\"coeffs\":[";
  for (int n = 0; n < c.num_segments(); ++n) {
    if (n) out += ",";
    out += "[";
    for (int l = 0; l < c.order; ++l) {
      if (l) out += ",";
      out += "[";
      for (int i = 0; i < c.num_nodes; ++i) {
        if (i) out += ",";
        out += "[";
        for (int j = 0; j < c.num_nodes; ++j) {
          if (j) out += ",";
          out += format_double(c.coeffs[n][l](i, j));
        }
        out += "]";
      }
      out += "]";
    }
    out += "]";
  }
  out += "]}\n";
  return out;
}

inline TvarCoefficients coefficients_from_json(const std::string& text,
                                               const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(origin + ": " + e.what());
  }
  try {
    TvarCoefficients c;
    c.num_nodes = j.at("P").get<int>();
    c.order = j.at("L").get<int>();
    c.num_samples = j.at("T").get<int>();
    c.segment_starts = j.at("segment_starts").get<std::vector<int>>();
    for (const auto& seg : j.at("coeffs")) {
      std::vector<Matrix> lags;
      for (const auto& lag : seg) {
        Matrix a(c.num_nodes, c.num_nodes);
        int i = 0;
        for (const auto& row : lag) {
          int jj = 0;
          for (const auto& x : row) a(i, jj++) = x.get<double>();
          ++i;
        }
        lags.push_back(std::move(a));
      }
      c.coeffs.push_back(std::move(lags));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(origin + ": " + e.what());
  }
}

inline void save_coefficients_json(const std::string& path, const TvarCoefficients& c) {
  write_text_file(path, coefficients_to_json(c));
}

inline TvarCoefficients load_coefficients_json(const std::string& path) {
  return coefficients_from_json(read_text_file(path),
                                std::filesystem::path(path).filename().string());
}

// ---------------------------------------------------------------------------
// Breakpoints CSV: header "t,i,j", 1-based indices, sorted by (t, i, j).

inline std::string breakpoints_to_csv(const BreakpointSet& set) {
  std::string out = "t,i,j\n";
  for (const auto& b : set.items)
    out += std::to_string(b.t) + "," + std::to_string(b.i) + "," + std::to_string(b.j) + "\n";
  return out;
}

inline BreakpointSet breakpoints_from_csv(const std::string& text, const std::string& origin) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != "t,i,j")
    throw ArgumentError(origin + ":1: header must be 't,i,j'");
  BreakpointSet set;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != 3)
      throw ArgumentError(origin + ":" + std::to_string(r + 1) + ": expected 3 fields");
    Breakpoint b;
    b.t = static_cast<int>(detail::parse_int_field(fields[0], origin, int(r + 1), 1));
    b.i = static_cast<int>(detail::parse_int_field(fields[1], origin, int(r + 1), 2));
    b.j = static_cast<int>(detail::parse_int_field(fields[2], origin, int(r + 1), 3));
    set.items.push_back(b);
  }
  set.normalize();
  return set;
}

inline void save_breakpoints_csv(const std::string& path, const BreakpointSet& set) {
  write_text_file(path, breakpoints_to_csv(set));
}

inline BreakpointSet load_breakpoints_csv(const std::string& path) {
  return breakpoints_from_csv(read_text_file(path),
                              std::filesystem::path(path).filename().string());
}

// ---------------------------------------------------------------------------
// Generator config JSON. All keys optional (defaults are the built-in
// experiment parameters); unknown keys are rejected.

inline std::string generator_config_to_json(const GeneratorConfig& cfg) {
  return std::string("{") + "\"num_nodes\":" + std::to_string(cfg.num_nodes) +
         ",\"edge_prob\":" + format_double(cfg.edge_prob) +
         ",\"order\":" + std::to_string(cfg.order) +
         ",\"num_samples\":" + std::to_string(cfg.num_samples) +
         ",\"num_breakpoints\":" + std::to_string(cfg.num_breakpoints) +
         ",\"zero_switch_prob\":" + format_double(cfg.zero_switch_prob) +
         ",\"innovation_variance\":" + format_double(cfg.innovation_variance) +
         ",\"stability_radius\":" + format_double(cfg.stability_radius) +
         ",\"seed\":" + std::to_string(cfg.seed) + "}\n";
}

inline GeneratorConfig generator_config_from_json(const std::string& text,
                                                  const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ArgumentError(origin + ": config must be a JSON object");
  GeneratorConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_nodes")
        cfg.num_nodes = value.get<int>();
      else if (key == "edge_prob")
        cfg.edge_prob = value.get<double>();
      else if (key == "order")
        cfg.order = value.get<int>();
      else if (key == "num_samples")
        cfg.num_samples = value.get<int>();
      else if (key == "num_breakpoints")
        cfg.num_breakpoints = value.get<int>();
      else if (key == "zero_switch_prob")
        cfg.zero_switch_prob = value.get<double>();
      else if (key == "innovation_variance")
        cfg.innovation_variance = value.get<double>();
      else if (key == "stability_radius")
        cfg.stability_radius = value.get<double>();
      else if (key == "seed")
        cfg.seed = value.get<std::uint64_t>();
      else
        throw ArgumentError(origin + ": unknown config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(origin + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Solve report, best grid point and metrics JSON (write-only artifacts).

inline std::string solve_report_to_json(const SolveReport& r) {
  return std::string("{") + "\"iterations\":" + std::to_string(r.iterations) +
         ",\"primal_residual\":" + format_double(r.primal_residual) +
         ",\"dual_residual\":" + format_double(r.dual_residual) +
         ",\"eps_primal\":" + format_double(r.eps_primal) +
         ",\"eps_dual\":" + format_double(r.eps_dual) +
         ",\"objective\":" + format_double(r.objective) +
         ",\"converged\":" + (r.converged ? "true" : "false") +
         ",\"wall_time_s\":" + format_double(r.wall_time_s) + "}\n";
}

inline std::string best_point_to_json(double lambda, double gamma, double score) {
  return "{\"lambda\":" + format_double(lambda) + ",\"gamma\":" + format_double(gamma) +
         ",\"score\":" + format_double(score) + "}\n";
}

inline std::string metrics_to_json(const RecoveryMetrics& m) {
  return std::string("{\"breakpoints\":{") + "\"precision\":" + format_double(m.breakpoints.precision) +
         ",\"recall\":" + format_double(m.breakpoints.recall) +
         ",\"f1\":" + format_double(m.breakpoints.f1) +
         ",\"num_detected\":" + std::to_string(m.breakpoints.num_detected) +
         ",\"num_truth\":" + std::to_string(m.breakpoints.num_truth) +
         ",\"num_matched\":" + std::to_string(m.breakpoints.num_matched) +
         ",\"time_tol\":" + std::to_string(m.breakpoints.time_tol) + "},\"edges\":{" +
         "\"precision\":" + format_double(m.edges.precision) +
         ",\"recall\":" + format_double(m.edges.recall) + ",\"f1\":" + format_double(m.edges.f1) +
         ",\"zero_tol\":" + format_double(m.edges.zero_tol) + "}," +
         "\"nmse\":" + format_double(m.nmse) + "}\n";
}

// ---------------------------------------------------------------------------
// Score table CSV: "lambda,gamma,score" rows. A grid file uses the same
// layout with the score column optional.

inline std::string score_table_to_csv(const std::vector<GridPointScore>& table) {
  std::string out = "lambda,gamma,score\n";
  for (const auto& row : table)
    out += format_double(row.lambda) + "," + format_double(row.gamma) + "," +
           format_double(row.score) + "\n";
  return out;
}

inline GridSpec grid_from_csv(const std::string& text, const std::string& origin) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ArgumentError(origin + ":1: empty grid file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "lambda" || header[1] != "gamma")
    throw ArgumentError(origin + ":1: header must start with 'lambda,gamma'");
  GridSpec grid;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() < 2)
      throw ArgumentError(origin + ":" + std::to_string(r + 1) + ": expected 'lambda,gamma'");
    grid.lambdas.push_back(detail::parse_double_field(fields[0], origin, int(r + 1), 1));
    grid.gammas.push_back(detail::parse_double_field(fields[1], origin, int(r + 1), 2));
  }
  grid.validate();
  return grid;
}

// ---------------------------------------------------------------------------
// Estimate report CSV: one row per (edge, segment) with the filter norm and
// taps — the numeric content behind per-edge trajectory plots.

inline std::string estimate_report_csv(const TvarCoefficients& c) {
  c.validate();
  std::string out = "i,j,window_start,window_end,norm";
  for (int l = 1; l <= c.order; ++l) out += ",tap_" + std::to_string(l);
  out += "\n";
  for (int i = 1; i <= c.num_nodes; ++i)
    for (int j = 1; j <= c.num_nodes; ++j)
      for (int n = 0; n < c.num_segments(); ++n) {
        Vector taps(c.order);
        for (int l = 0; l < c.order; ++l) taps[l] = c.coeffs[n][l](i - 1, j - 1);
        out += std::to_string(i) + "," + std::to_string(j) + "," +
               std::to_string(c.segment_starts[n]) + "," + std::to_string(c.segment_end(n)) +
               "," + format_double(taps.norm());
        for (int l = 0; l < c.order; ++l) out += "," + format_double(taps[l]);
        out += "\n";
      }
  return out;
}

}  // namespace tvarnet
