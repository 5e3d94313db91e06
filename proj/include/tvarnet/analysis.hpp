#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "tvarnet/admm.hpp"
#include "tvarnet/design.hpp"
#include "tvarnet/errors.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/windowing.hpp"

namespace tvarnet {

/// Per-edge changes of a (typically windowed) estimate that exceed tol in
/// l2 norm, reported at the segment boundaries where they occur.
inline BreakpointSet detect_local_breakpoints(const TvarCoefficients& coeffs, double tol) {
  return local_breakpoints_of(coeffs, tol);
}

/// 1e-3 times the median nonzero filter norm of the estimate; 0 when the
/// estimate has no nonzero filter.
inline double default_detection_tol(const TvarCoefficients& coeffs) {
  std::vector<double> norms;
  for (int n = 0; n < coeffs.num_segments(); ++n)
    for (int i = 1; i <= coeffs.num_nodes; ++i)
      for (int j = 1; j <= coeffs.num_nodes; ++j) {
        double sq = 0.0;
        for (int l = 0; l < coeffs.order; ++l) {
          const double a = coeffs.coeffs[n][l](i - 1, j - 1);
          sq += a * a;
        }
        if (sq > 0.0) norms.push_back(std::sqrt(sq));
      }
  if (norms.empty()) return 0.0;
  std::sort(norms.begin(), norms.end());
  const std::size_t m = norms.size();
  const double median = m % 2 == 1 ? norms[m / 2] : 0.5 * (norms[m / 2 - 1] + norms[m / 2]);
  return 1e-3 * median;
}

struct BreakpointMatch {
  double precision = 1.0;  // 1 when nothing was detected (no false claims)
  double recall = 1.0;     // 1 when the truth is empty
  double f1 = 1.0;
  int num_detected = 0;
  int num_truth = 0;
  int num_matched = 0;
  int time_tol = 0;
};

/// One-to-one matching of triplets sharing (i, j) with |t_det - t_true| <=
/// time_tol. Within each edge both time lists are sorted and matched with
/// the greedy two-pointer sweep, which attains the maximum matching and is
/// therefore symmetric under swapping the two sets.
inline BreakpointMatch match_breakpoints(const BreakpointSet& detected, const BreakpointSet& truth,
                                         int time_tol) {
  if (time_tol < 0) throw ArgumentError("time_tol must be >= 0");
  std::map<std::pair<int, int>, std::pair<std::vector<int>, std::vector<int>>> by_edge;
  for (const auto& b : detected.items) by_edge[{b.i, b.j}].first.push_back(b.t);
  for (const auto& b : truth.items) by_edge[{b.i, b.j}].second.push_back(b.t);

  int matched = 0;
  for (auto& [edge, lists] : by_edge) {
    auto& [det, tru] = lists;
    std::size_t a = 0, b = 0;
    while (a < det.size() && b < tru.size()) {
      if (std::abs(det[a] - tru[b]) <= time_tol) {
        ++matched;
        ++a;
        ++b;
      } else if (det[a] < tru[b]) {
        ++a;
      } else {
        ++b;
      }
    }
  }

  BreakpointMatch out;
  out.num_detected = static_cast<int>(detected.size());
  out.num_truth = static_cast<int>(truth.size());
  out.num_matched = matched;
  out.time_tol = time_tol;
  out.precision = out.num_detected == 0 ? 1.0 : double(matched) / out.num_detected;
  out.recall = out.num_truth == 0 ? 1.0 : double(matched) / out.num_truth;
  out.f1 = (out.precision + out.recall) == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

struct EdgeRecovery {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  double zero_tol = kEdgeZeroTol;
};

/// Per-instant comparison of edge sets, averaged over [L+1, T]. Instants
/// inside a shared segment intersection contribute the same counts, so the
/// scan walks merged segment boundaries and weights by run length.
inline EdgeRecovery edge_recovery(const TvarCoefficients& est, const TvarCoefficients& truth,
                                  double zero_tol = kEdgeZeroTol) {
  if (est.num_nodes != truth.num_nodes || est.order != truth.order ||
      est.num_samples != truth.num_samples)
    throw ArgumentError("estimate and truth shapes differ (P, L, T must match)");

  std::vector<int> boundaries = est.segment_starts;
  boundaries.insert(boundaries.end(), truth.segment_starts.begin(), truth.segment_starts.end());
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

  double w_precision = 0.0, w_recall = 0.0, w_f1 = 0.0;
  const double total = est.num_samples - est.order;
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    const int a = boundaries[k];
    const int b = k + 1 < boundaries.size() ? boundaries[k + 1] - 1 : est.num_samples;
    const auto e_est = edge_set_at(est, a, zero_tol);
    const auto e_tru = edge_set_at(truth, a, zero_tol);
    std::vector<std::pair<int, int>> both;
    std::set_intersection(e_est.begin(), e_est.end(), e_tru.begin(), e_tru.end(),
                          std::back_inserter(both));
    const double p = e_est.empty() ? 1.0 : double(both.size()) / e_est.size();
    const double r = e_tru.empty() ? 1.0 : double(both.size()) / e_tru.size();
    const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    const double weight = (b - a + 1) / total;
    w_precision += weight * p;
    w_recall += weight * r;
    w_f1 += weight * f;
  }
  EdgeRecovery out;
  out.precision = w_precision;
  out.recall = w_recall;
  out.f1 = w_f1;
  out.zero_tol = zero_tol;
  return out;
}

/// Prediction error energy over the holdout divided by the signal energy.
inline double forecast_nmse(const TvarCoefficients& coeffs, const MultivariateSeries& series,
                            int t_begin, int t_end) {
  if (t_begin > t_end) throw ArgumentError("empty holdout range");
  if (t_begin < coeffs.order + 1 || t_end > coeffs.num_samples ||
      t_end > series.num_samples())
    throw ArgumentError("holdout must lie within [L+1, T]");
  double num = 0.0, den = 0.0;
  for (int t = t_begin; t <= t_end; ++t) {
    num += (series.y(t) - forecast_one_step(coeffs, series, t)).squaredNorm();
    den += series.y(t).squaredNorm();
  }
  if (den == 0.0) throw ArgumentError("holdout has zero signal energy");
  return num / den;
}

/// Global-breakpoint baseline: 1/2 ||Y - Z B||_F^2 + lambda sum_n
/// ||B_n - B_{n-1}||_F. The fused group at each boundary is the entire
/// coefficient block, so any detected change is simultaneous across all
/// edges. Solved with the same ADMM machinery using the whole-block prox.
inline SolveResult baseline_global_solve(const DesignMatrices& design, double lambda,
                                         const WindowPartition& part, const AdmmConfig& base) {
  if (lambda < 0.0) throw ArgumentError("baseline weight must be >= 0");
  AdmmConfig cfg = base;
  cfg.lambda = 0.0;
  cfg.gamma = lambda;
  return admm_solve(collapse_problem(design, part), cfg, TvPenalty::kWholeBlock);
}

struct RecoveryMetrics {
  BreakpointMatch breakpoints;
  EdgeRecovery edges;
  double nmse = 0.0;
};

}  // namespace tvarnet
