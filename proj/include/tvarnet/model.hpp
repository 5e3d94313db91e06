#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <compare>
#include <string>
#include <utility>
#include <vector>

#include "tvarnet/errors.hpp"
#include "tvarnet/series.hpp"

namespace tvarnet {

/// Absolute tolerance under which an edge filter counts as zero. Exact
/// nonzero-ness is meaningless in floating point, so edge membership uses
/// a strict norm threshold.
inline constexpr double kEdgeZeroTol = 1e-10;

/// Length-L impulse response of the time-varying filter that carries node
/// j's influence on node i: taps[l-1] = a^(l)_{ij,t}.
struct EdgeFilter {
  Vector taps;

  double norm() const { return taps.norm(); }
  int order() const { return static_cast<int>(taps.size()); }
};

/// Gaussian innovation parameters of the TVAR recursion.
struct InnovationSpec {
  double variance = 1.0;

  void validate() const {
    if (!(variance > 0.0)) throw ArgumentError("innovation variance must be positive");
  }
};

struct Breakpoint {
  int t = 0;  // 1-based time of the change (filter at t differs from t-1)
  int i = 0;  // target node, 1-based
  int j = 0;  // source node, 1-based

  friend auto operator<=>(const Breakpoint&, const Breakpoint&) = default;
};

/// Deduplicated (t, i, j) triplets sorted by (t, i, j).
struct BreakpointSet {
  std::vector<Breakpoint> items;

  void normalize() {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::vector<int> instants() const {
    std::vector<int> ts;
    for (const auto& b : items)
      if (ts.empty() || ts.back() != b.t) ts.push_back(b.t);
    return ts;
  }

  friend bool operator==(const BreakpointSet&, const BreakpointSet&) = default;
};

/// Piecewise-constant stack of L coefficient matrices covering the target
/// range [L+1, T]. A segment of unit length per instant recovers the fully
/// general per-instant model; the windowed estimator and the generator both
/// produce coarser segments.
struct TvarCoefficients {
  int order = 0;        // L
  int num_nodes = 0;    // P
  int num_samples = 0;  // T
  std::vector<int> segment_starts;          // first == L+1, strictly increasing, <= T
  std::vector<std::vector<Matrix>> coeffs;  // [segment][l-1] -> P x P

  int num_segments() const { return static_cast<int>(segment_starts.size()); }

  /// 0-based index of the segment containing t; t must lie in [L+1, T].
  int segment_of(int t) const {
    if (t < order + 1 || t > num_samples)
      throw ArgumentError("time " + std::to_string(t) + " outside [" +
                          std::to_string(order + 1) + ", " + std::to_string(num_samples) + "]");
    auto it = std::upper_bound(segment_starts.begin(), segment_starts.end(), t);
    return static_cast<int>(it - segment_starts.begin()) - 1;
  }

  /// Inclusive last instant of 0-based segment n.
  int segment_end(int n) const {
    return n + 1 < num_segments() ? segment_starts[n + 1] - 1 : num_samples;
  }

  /// A^(l) on 0-based segment n; l is 1-based.
  const Matrix& lag_matrix(int n, int l) const { return coeffs[n][l - 1]; }

  void validate() const {
    if (order < 1) throw ArgumentError("model order must be >= 1");
    if (num_nodes < 1) throw ArgumentError("node count must be >= 1");
    if (num_samples <= order) throw ArgumentError("need T > L");
    if (segment_starts.empty() || segment_starts.front() != order + 1)
      throw ArgumentError("first segment must start at L+1");
    for (std::size_t k = 1; k < segment_starts.size(); ++k)
      if (segment_starts[k] <= segment_starts[k - 1])
        throw ArgumentError("segment starts must be strictly increasing");
    if (segment_starts.back() > num_samples)
      throw ArgumentError("segment start beyond T");
    if (coeffs.size() != segment_starts.size())
      throw ArgumentError("segment count mismatch between starts and coefficients");
    for (const auto& seg : coeffs) {
      if (static_cast<int>(seg.size()) != order)
        throw ArgumentError("each segment needs L lag matrices");
      for (const auto& a : seg) {
        if (a.rows() != num_nodes || a.cols() != num_nodes)
          throw ArgumentError("lag matrices must be P x P");
        if (!a.allFinite()) throw ArgumentError("coefficients contain non-finite values");
      }
    }
  }
};

inline void check_node_index(const TvarCoefficients& c, int node, const char* name) {
  if (node < 1 || node > c.num_nodes)
    throw ArgumentError(std::string(name) + " index " + std::to_string(node) +
                        " outside [1, " + std::to_string(c.num_nodes) + "]");
}

/// Filter a_{ij,t} read from the segment containing t.
inline EdgeFilter edge_filter_at(const TvarCoefficients& c, int i, int j, int t) {
  check_node_index(c, i, "node i");
  check_node_index(c, j, "node j");
  const int n = c.segment_of(t);
  Vector taps(c.order);
  for (int l = 1; l <= c.order; ++l) taps[l - 1] = c.coeffs[n][l - 1](i - 1, j - 1);
  return EdgeFilter{std::move(taps)};
}

/// Edge set E_t = {(i, j) : ||a_{ij,t}||_2 > zero_tol}, sorted by (i, j).
inline std::vector<std::pair<int, int>> edge_set_at(const TvarCoefficients& c, int t,
                                                    double zero_tol = kEdgeZeroTol) {
  if (zero_tol < 0) throw ArgumentError("zero_tol must be >= 0");
  const int n = c.segment_of(t);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= c.num_nodes; ++i)
    for (int j = 1; j <= c.num_nodes; ++j) {
      double sq = 0.0;
      for (int l = 0; l < c.order; ++l) {
        const double a = c.coeffs[n][l](i - 1, j - 1);
        sq += a * a;
      }
      if (std::sqrt(sq) > zero_tol) edges.emplace_back(i, j);
    }
  return edges;
}

/// All (t, i, j) with ||a_{ij,t} - a_{ij,t-1}||_2 > tol. With the
/// piecewise-constant representation only segment starts can change, so the
/// scan walks segment boundaries.
inline BreakpointSet local_breakpoints_of(const TvarCoefficients& c, double tol) {
  if (tol < 0) throw ArgumentError("tol must be >= 0");
  BreakpointSet out;
  for (int n = 1; n < c.num_segments(); ++n) {
    const int t = c.segment_starts[n];
    for (int i = 1; i <= c.num_nodes; ++i)
      for (int j = 1; j <= c.num_nodes; ++j) {
        double sq = 0.0;
        for (int l = 0; l < c.order; ++l) {
          const double d = c.coeffs[n][l](i - 1, j - 1) - c.coeffs[n - 1][l](i - 1, j - 1);
          sq += d * d;
        }
        if (std::sqrt(sq) > tol) out.items.push_back({t, i, j});
      }
  }
  out.normalize();
  return out;
}

/// One-step prediction yhat_t = sum_l A^(l)_t y_{t-l}.
inline Vector forecast_one_step(const TvarCoefficients& c, const MultivariateSeries& history,
                                int t) {
  if (history.num_nodes() != c.num_nodes)
    throw ArgumentError("history node count does not match the model");
  if (t < c.order + 1)
    throw ArgumentError("forecast needs t >= L+1");
  if (t - 1 > history.num_samples())
    throw ArgumentError("history too short: need samples up to t-1 = " + std::to_string(t - 1));
  const int n = c.segment_of(t);
  Vector yhat = Vector::Zero(c.num_nodes);
  for (int l = 1; l <= c.order; ++l) yhat += c.coeffs[n][l - 1] * history.y(t - l);
  return yhat;
}

/// Per-segment compressed view of the edge sets E_t.
struct TimeVaryingGraph {
  int num_nodes = 0;
  int first_time = 0;  // L+1
  int last_time = 0;   // T
  std::vector<int> segment_starts;
  std::vector<std::vector<std::pair<int, int>>> edges;  // per segment, sorted

  const std::vector<std::pair<int, int>>& edges_at(int t) const {
    if (t < first_time || t > last_time)
      throw ArgumentError("time " + std::to_string(t) + " outside the graph's range");
    auto it = std::upper_bound(segment_starts.begin(), segment_starts.end(), t);
    return edges[static_cast<std::size_t>(it - segment_starts.begin()) - 1];
  }
};

inline TimeVaryingGraph time_varying_graph(const TvarCoefficients& c,
                                           double zero_tol = kEdgeZeroTol) {
  TimeVaryingGraph g;
  g.num_nodes = c.num_nodes;
  g.first_time = c.order + 1;
  g.last_time = c.num_samples;
  g.segment_starts = c.segment_starts;
  g.edges.reserve(c.num_segments());
  for (int n = 0; n < c.num_segments(); ++n)
    g.edges.push_back(edge_set_at(c, c.segment_starts[n], zero_tol));
  return g;
}

}  // namespace tvarnet
