#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tvarnet/errors.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/series.hpp"

namespace tvarnet {

using Rng = std::mt19937_64;

/// Parameters of the synthetic experiment: an Erdos-Renyi support graph, a
/// stable coefficient path with locally placed breakpoints, and a Gaussian
/// TVAR realization.
struct GeneratorConfig {
  int num_nodes = 4;
  double edge_prob = 0.5;
  int order = 4;
  int num_samples = 1000;
  int num_breakpoints = 100;
  double zero_switch_prob = 0.4;
  double innovation_variance = 0.03;
  double stability_radius = 0.95;
  std::uint64_t seed = 6;

  void validate() const;
};

/// Ordered pairs (i, j), i != j, each included independently with the given
/// probability. Pairs are visited row-major (i outer, j inner) so the draw
/// sequence is fixed for a given engine state.
inline std::vector<std::pair<int, int>> sample_erdos_renyi(int num_nodes, double edge_prob,
                                                           Rng& rng) {
  if (num_nodes < 1) throw ArgumentError("need at least one node");
  if (edge_prob < 0.0 || edge_prob > 1.0) throw ArgumentError("edge_prob must be in [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= num_nodes; ++i)
    for (int j = 1; j <= num_nodes; ++j) {
      if (i == j) continue;
      if (unif(rng) < edge_prob) edges.emplace_back(i, j);
    }
  return edges;
}

/// Spectral radius of the PL x PL companion matrix [[A_1 ... A_L], [I, 0]].
inline double companion_spectral_radius(const std::vector<Matrix>& lags) {
  if (lags.empty()) throw ArgumentError("need at least one lag matrix");
  const int p = static_cast<int>(lags.front().rows());
  for (const auto& a : lags)
    if (a.rows() != p || a.cols() != p)
      throw ArgumentError("lag matrices must all be square with matching size");
  const int order = static_cast<int>(lags.size());
  const int n = p * order;
  Matrix companion = Matrix::Zero(n, n);
  for (int l = 0; l < order; ++l) companion.block(0, l * p, p, p) = lags[l];
  if (order > 1)
    companion.block(p, 0, n - p, n - p) = Matrix::Identity(n - p, n - p);
  Eigen::EigenSolver<Matrix> es(companion, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericError("companion eigensolve failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

/// Scales all lag matrices in place by the largest c <= 1 with companion
/// radius <= rho_max; returns c. Leaves stable inputs untouched (c = 1).
/// The bisection narrows the bracket until its width underflows the radius
/// resolution, so the returned radius sits within 1e-6 of rho_max.
inline double stabilize_in_place(std::vector<Matrix>& lags, double rho_max) {
  if (!(rho_max > 0.0 && rho_max < 1.0)) throw ArgumentError("rho_max must lie in (0, 1)");
  if (companion_spectral_radius(lags) <= rho_max) return 1.0;
  auto radius_at = [&](double c) {
    std::vector<Matrix> scaled;
    scaled.reserve(lags.size());
    for (const auto& a : lags) scaled.push_back(c * a);
    return companion_spectral_radius(scaled);
  };
  double lo = 0.0, hi = 1.0;  // radius(0) = 0 <= rho_max, radius(1) > rho_max
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (radius_at(mid) <= rho_max ? lo : hi) = mid;
  }
  for (auto& a : lags) a *= lo;
  return lo;
}

}  // namespace detail

/// Returns c * A_l for the largest c <= 1 with companion radius <= rho_max;
/// inputs already inside the radius are returned unchanged.
inline std::vector<Matrix> stabilize(std::vector<Matrix> lags, double rho_max) {
  detail::stabilize_in_place(lags, rho_max);
  return lags;
}

/// Breakpoint instants at t = L + 1 + round(k (T-L-1) / (N_b+1)), k = 1..N_b.
inline std::vector<int> breakpoint_instants(const GeneratorConfig& cfg) {
  std::vector<int> instants;
  instants.reserve(cfg.num_breakpoints);
  const double span = cfg.num_samples - cfg.order - 1;
  for (int k = 1; k <= cfg.num_breakpoints; ++k)
    instants.push_back(cfg.order + 1 +
                       static_cast<int>(std::lround(k * span / (cfg.num_breakpoints + 1))));
  return instants;
}

inline void GeneratorConfig::validate() const {
  if (num_nodes < 1) throw ArgumentError("num_nodes must be >= 1");
  if (order < 1) throw ArgumentError("order must be >= 1");
  if (num_samples <= order) throw ArgumentError("num_samples must exceed order");
  if (num_breakpoints < 0) throw ArgumentError("num_breakpoints must be >= 0");
  if (num_breakpoints > num_samples - order - 1)
    throw ArgumentError("num_breakpoints exceeds the available instants [L+2, T]");
  if (num_breakpoints > 0 && num_nodes < 2)
    throw ArgumentError("breakpoints need at least two nodes (no off-diagonal pairs)");
  if (edge_prob < 0.0 || edge_prob > 1.0) throw ArgumentError("edge_prob must be in [0, 1]");
  if (zero_switch_prob < 0.0 || zero_switch_prob > 1.0)
    throw ArgumentError("zero_switch_prob must be in [0, 1]");
  if (!(innovation_variance > 0.0)) throw ArgumentError("innovation_variance must be positive");
  if (!(stability_radius > 0.0 && stability_radius < 1.0))
    throw ArgumentError("stability_radius must lie in (0, 1)");
  const auto instants = breakpoint_instants(*this);
  for (std::size_t k = 1; k < instants.size(); ++k)
    if (instants[k] <= instants[k - 1])
      throw ArgumentError("breakpoint instants collide; reduce num_breakpoints");
}

/// One realized coefficient change. `scale` is the factor applied to the
/// fresh filter (1 when none was needed); `global_rescale` marks the fallback
/// where the whole segment had to be rescaled to stay inside the radius.
struct BreakEvent {
  int t = 0, i = 0, j = 0;
  bool zeroed = false;
  double scale = 1.0;
  bool global_rescale = false;
};

struct GroundTruth {
  TvarCoefficients coeffs;
  BreakpointSet breakpoints;   // == local_breakpoints_of(coeffs, 0)
  TimeVaryingGraph edge_sets;  // exact-zero tolerance
  std::vector<BreakEvent> events;
  double initial_scale = 1.0;
};

namespace detail {

inline std::pair<int, int> draw_offdiag_pair(int num_nodes, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, num_nodes * (num_nodes - 1) - 1);
  const int k = pick(rng);
  const int i = k / (num_nodes - 1);
  const int r = k % (num_nodes - 1);
  const int j = r < i ? r : r + 1;
  return {i + 1, j + 1};
}

inline void set_filter(std::vector<Matrix>& lags, int i, int j, const Vector& taps) {
  for (std::size_t l = 0; l < lags.size(); ++l) lags[l](i - 1, j - 1) = taps[static_cast<int>(l)];
}

/// Largest c in [0, 1] such that the system with filter (i, j) set to
/// c * taps has companion radius <= bound. Returns -1 when even c = 0
/// exceeds the bound (caller falls back to a whole-set rescale).
inline double max_stable_filter_scale(std::vector<Matrix> lags, int i, int j, const Vector& taps,
                                      double bound) {
  auto radius_with = [&](double c) {
    set_filter(lags, i, j, Vector(c * taps));
    return companion_spectral_radius(lags);
  };
  if (radius_with(1.0) <= bound) return 1.0;
  if (radius_with(0.0) > bound) return -1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (radius_with(mid) <= bound ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

/// Back-off applied when a scaling has to clip (the initial system, or a
/// fresh filter that does not fit at c = 1). Landing exactly on the radius
/// bound would pin the system there and squash every later insertion toward
/// zero; retreating to this fraction of the feasible scale keeps a real gap
/// below the bound after each clip.
inline constexpr double kClipBackoff = 0.8;

/// Working radius for filter insertions, as a fraction of rho_max. Keeping
/// inserted systems this far inside the stability region leaves room for the
/// non-monotone radius bumps that zeroing an edge can cause, which would
/// otherwise force whole-set rescales.
inline constexpr double kWorkRadiusFactor = 0.85;

/// Draws the support graph and the piecewise-constant coefficient path.
/// Draw order: edge coins (row-major), initial taps (row-major over support
/// edges, lag-major within a filter), then per breakpoint the pair index,
/// the zero-switch coin (only when the edge exists), and fresh taps.
inline GroundTruth generate_coefficient_path(const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  const int p = cfg.num_nodes;
  const int order = cfg.order;
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  GroundTruth truth;
  const auto support = sample_erdos_renyi(p, cfg.edge_prob, rng);

  std::vector<Matrix> lags(order, Matrix::Zero(p, p));
  for (int i = 1; i <= p; ++i)
    for (int j = 1; j <= p; ++j) {
      if (i == j) continue;
      const bool on = std::binary_search(support.begin(), support.end(), std::make_pair(i, j));
      if (!on) continue;
      for (int l = 0; l < order; ++l) lags[l](i - 1, j - 1) = std_normal(rng);
    }
  const double work_radius = kWorkRadiusFactor * cfg.stability_radius;
  if (companion_spectral_radius(lags) > work_radius) {
    truth.initial_scale = kClipBackoff * detail::stabilize_in_place(lags, work_radius);
    for (auto& a : lags) a *= kClipBackoff;
  }

  TvarCoefficients coeffs;
  coeffs.order = order;
  coeffs.num_nodes = p;
  coeffs.num_samples = cfg.num_samples;
  coeffs.segment_starts = {order + 1};
  coeffs.coeffs = {lags};

  for (const int tb : breakpoint_instants(cfg)) {
    auto next = coeffs.coeffs.back();
    const auto [i, j] = detail::draw_offdiag_pair(p, rng);
    BreakEvent ev;
    ev.t = tb;
    ev.i = i;
    ev.j = j;

    double filter_sq = 0.0;
    for (int l = 0; l < order; ++l) filter_sq += next[l](i - 1, j - 1) * next[l](i - 1, j - 1);
    const bool edge_exists = filter_sq > 0.0;

    if (edge_exists && unif(rng) < cfg.zero_switch_prob) {
      detail::set_filter(next, i, j, Vector::Zero(order));
      ev.zeroed = true;
    } else {
      Vector taps(order);
      for (int l = 0; l < order; ++l) taps[l] = std_normal(rng);
      auto without = next;
      detail::set_filter(without, i, j, Vector::Zero(order));
      const double floor_radius = companion_spectral_radius(without);
      const double bound =
          floor_radius <= work_radius ? work_radius : cfg.stability_radius;
      const double c_max = floor_radius > cfg.stability_radius
                               ? -1.0
                               : detail::max_stable_filter_scale(next, i, j, taps, bound);
      if (c_max < 0.0) {
        detail::set_filter(next, i, j, taps);  // whole-set fallback below
      } else {
        const double c = c_max >= 1.0 ? 1.0 : kClipBackoff * c_max;
        detail::set_filter(next, i, j, Vector(c * taps));
        ev.scale = c;
      }
    }
    if (companion_spectral_radius(next) > cfg.stability_radius) {
      detail::stabilize_in_place(next, work_radius);
      for (auto& a : next) a *= kClipBackoff;
      ev.global_rescale = true;
    }
    coeffs.segment_starts.push_back(tb);
    coeffs.coeffs.push_back(std::move(next));
    truth.events.push_back(ev);
  }

  coeffs.validate();
  truth.breakpoints = local_breakpoints_of(coeffs, 0.0);
  truth.edge_sets = time_varying_graph(coeffs, 0.0);
  truth.coeffs = std::move(coeffs);
  return truth;
}

/// Runs the TVAR recursion: y_1..y_L i.i.d. N(0, sigma^2 I), then
/// y_t = sum_l A^(l)_t y_{t-l} + eps_t. Innovations are drawn per instant in
/// node order.
inline MultivariateSeries simulate_series(const GroundTruth& truth, double innovation_variance,
                                          Rng& rng) {
  InnovationSpec{innovation_variance}.validate();
  const auto& c = truth.coeffs;
  c.validate();
  const int p = c.num_nodes;
  const int order = c.order;
  const double sigma = std::sqrt(innovation_variance);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  Matrix values(p, c.num_samples);
  for (int t = 1; t <= order; ++t)
    for (int row = 0; row < p; ++row) values(row, t - 1) = sigma * std_normal(rng);
  for (int t = order + 1; t <= c.num_samples; ++t) {
    const int n = c.segment_of(t);
    Vector y = Vector::Zero(p);
    for (int l = 1; l <= order; ++l) y += c.coeffs[n][l - 1] * values.col(t - 1 - l);
    for (int row = 0; row < p; ++row) y[row] += sigma * std_normal(rng);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e12)
      throw NumericError("simulation diverged at t = " + std::to_string(t));
    values.col(t - 1) = y;
  }
  return MultivariateSeries(std::move(values), default_node_labels(p));
}

}  // namespace tvarnet
