#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "tvarnet/admm.hpp"
#include "tvarnet/design.hpp"
#include "tvarnet/errors.hpp"
#include "tvarnet/series.hpp"
#include "tvarnet/windowing.hpp"

namespace tvarnet {

/// Interleaved M-fold plan: instant t is a validation target in fold
/// t mod M and a fit row everywhere else. Every instant stays available as
/// a regressor in all folds.
struct CvPlan {
  int num_folds = 0;    // M
  int order = 0;        // L
  int num_samples = 0;  // T

  int fold_of(int t) const { return t % num_folds; }

  std::vector<int> validation_targets(int fold) const {
    std::vector<int> ts;
    for (int t = order + 1; t <= num_samples; ++t)
      if (fold_of(t) == fold) ts.push_back(t);
    return ts;
  }
};

inline CvPlan make_cv_plan(int order, int num_samples, int num_folds) {
  if (num_folds < 2) throw ArgumentError("need at least 2 folds");
  if (num_samples - order < num_folds)
    throw ArgumentError("too few target instants for " + std::to_string(num_folds) + " folds");
  return CvPlan{num_folds, order, num_samples};
}

struct GridSpec {
  std::vector<double> lambdas;
  std::vector<double> gammas;

  void validate() const {
    if (lambdas.empty() || gammas.empty()) throw ArgumentError("grid must be nonempty");
    for (double x : lambdas)
      if (!(x > 0.0)) throw ArgumentError("grid lambdas must be positive");
    for (double x : gammas)
      if (!(x > 0.0)) throw ArgumentError("grid gammas must be positive");
  }
};

/// Log-spaced default grid anchored at the smallest weight that zeroes the
/// group-lasso solution: lambda_max = max group norm of Z^T Y over the
/// windowed blocks.
inline GridSpec default_grid(const DesignMatrices& design, const WindowPartition& part,
                             int points_per_axis = 5, double decades = 4.0) {
  const BlockProblem blocks = collapse_problem(design, part);
  double lambda_max = 0.0;
  for (const auto& g : blocks.cross)
    for (int i = 1; i <= blocks.num_nodes; ++i)
      for (int j = 1; j <= blocks.num_nodes; ++j)
        lambda_max = std::max(lambda_max, edge_group(g, i, j, blocks.num_nodes).norm());
  const double base = std::max(lambda_max, 1e-12);
  GridSpec grid;
  for (int k = 0; k < points_per_axis; ++k) {
    const double e = points_per_axis == 1 ? 0.0 : decades * (double(k) / (points_per_axis - 1) - 1.0);
    grid.lambdas.push_back(base * std::pow(10.0, e));
  }
  grid.gammas = grid.lambdas;
  return grid;
}

namespace detail {

inline std::vector<int> validation_rows(const DesignMatrices& design, const CvPlan& plan,
                                        int fold) {
  std::vector<int> rows;
  for (int k = 0; k < design.num_rows(); ++k)
    if (plan.fold_of(design.target_time(k)) == fold) rows.push_back(k);
  return rows;
}

inline double mean_squared_residual(const DesignMatrices& design, const WindowPartition& part,
                                    const CoefficientStack& stack, const std::vector<int>& rows) {
  if (rows.empty()) throw ArgumentError("no rows to score");
  double sum = 0.0;
  for (int k : rows) {
    const int w = part.index_of(design.target_time(k));
    sum += (design.targets.row(k) - design.regressors.row(k) * stack.blocks[w]).squaredNorm();
  }
  return sum / static_cast<double>(rows.size());
}

inline BlockProblem fold_problem(const DesignMatrices& design, const WindowPartition& part,
                                 const CvPlan& plan, int fold) {
  DesignMatrices masked = design;
  for (int k = 0; k < masked.num_rows(); ++k)
    if (plan.fold_of(masked.target_time(k)) == fold) masked.row_mask[k] = 0;
  return collapse_problem(masked, part);
}

inline int worker_count_from_env(int num_folds) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TVARNET_WORKERS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) workers = parsed;
  }
  return std::max(1, std::min(workers, num_folds));
}

}  // namespace detail

/// Mean over folds of the mean squared one-step validation residual; each
/// fold refits on its masked rows. cfg carries the grid point (lambda,
/// gamma) together with the solver settings.
inline double cv_score(const MultivariateSeries& series, const WindowPartition& part,
                       const AdmmConfig& cfg, const CvPlan& plan,
                       TvPenalty mode = TvPenalty::kPerEdge) {
  const DesignMatrices design = build_design(series, plan.order);
  if (part.first != plan.order + 1 || part.last != plan.num_samples)
    throw ArgumentError("partition does not match the CV plan range");
  double total = 0.0;
  for (int fold = 0; fold < plan.num_folds; ++fold) {
    const auto result = admm_solve(detail::fold_problem(design, part, plan, fold), cfg, mode);
    total += detail::mean_squared_residual(design, part, result.solution,
                                           detail::validation_rows(design, plan, fold));
  }
  return total / plan.num_folds;
}

struct GridPointScore {
  double lambda = 0.0;
  double gamma = 0.0;
  double score = 0.0;
};

struct GridSearchResult {
  double best_lambda = 0.0;
  double best_gamma = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<GridPointScore> table;  // ascending (lambda, gamma)
  bool boundary_selected = false;
};

/// Scores every grid point with interleaved CV. Each fold walks the grid in
/// a fixed canonical order (lambda descending, then gamma descending),
/// warm-starting from the previous point, so scores do not depend on the
/// input order of the grid. Folds run in parallel (TVARNET_WORKERS caps the
/// thread count) and results are combined by index, keeping the output
/// bitwise independent of the worker count. Ties break toward the smallest
/// lambda, then the smallest gamma.
inline GridSearchResult grid_search(const MultivariateSeries& series, const WindowPartition& part,
                                    const GridSpec& grid, const CvPlan& plan,
                                    const AdmmConfig& base, TvPenalty mode = TvPenalty::kPerEdge) {
  grid.validate();
  const DesignMatrices design = build_design(series, plan.order);
  if (part.first != plan.order + 1 || part.last != plan.num_samples)
    throw ArgumentError("partition does not match the CV plan range");

  std::vector<double> lambdas = grid.lambdas;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  std::vector<double> gammas = mode == TvPenalty::kWholeBlock ? std::vector<double>{0.0}
                                                              : grid.gammas;
  std::sort(gammas.begin(), gammas.end(), std::greater<>());
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());

  struct PathPoint {
    double lambda, gamma;
  };
  std::vector<PathPoint> path;
  for (double l : lambdas)
    for (double g : gammas) path.push_back({l, g});

  const int num_points = static_cast<int>(path.size());
  std::vector<std::vector<double>> fold_scores(plan.num_folds,
                                               std::vector<double>(num_points, 0.0));
  auto run_fold = [&](int fold) {
    const BlockProblem problem = detail::fold_problem(design, part, plan, fold);
    const auto rows = detail::validation_rows(design, plan, fold);
    AdmmState warm;
    bool have_warm = false;
    for (int pi = 0; pi < num_points; ++pi) {
      AdmmConfig cfg = base;
      if (mode == TvPenalty::kWholeBlock) {
        cfg.lambda = 0.0;
        cfg.gamma = path[pi].lambda;  // single global-TV weight
      } else {
        cfg.lambda = path[pi].lambda;
        cfg.gamma = path[pi].gamma;
      }
      const auto result = admm_solve(problem, cfg, mode, have_warm ? &warm : nullptr);
      fold_scores[fold][pi] =
          detail::mean_squared_residual(design, part, result.solution, rows);
      warm = result.state;
      have_warm = true;
    }
  };

  const int workers = detail::worker_count_from_env(plan.num_folds);
  if (workers <= 1) {
    for (int fold = 0; fold < plan.num_folds; ++fold) run_fold(fold);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int fold = next.fetch_add(1); fold < plan.num_folds; fold = next.fetch_add(1))
          run_fold(fold);
      });
    for (auto& th : pool) th.join();
  }

  GridSearchResult result;
  for (int pi = 0; pi < num_points; ++pi) {
    double mean = 0.0;
    for (int fold = 0; fold < plan.num_folds; ++fold) mean += fold_scores[fold][pi];
    mean /= plan.num_folds;
    result.table.push_back({path[pi].lambda, path[pi].gamma, mean});
  }
  std::sort(result.table.begin(), result.table.end(), [](const auto& a, const auto& b) {
    return a.lambda != b.lambda ? a.lambda < b.lambda : a.gamma < b.gamma;
  });
  for (const auto& row : result.table) {
    const bool better = row.score < result.best_score;
    if (better) {
      result.best_score = row.score;
      result.best_lambda = row.lambda;
      result.best_gamma = row.gamma;
    }
  }
  const auto [lmin, lmax] = std::minmax_element(lambdas.begin(), lambdas.end());
  result.boundary_selected = lambdas.size() > 1 && (result.best_lambda == *lmin ||
                                                    result.best_lambda == *lmax);
  if (mode != TvPenalty::kWholeBlock && gammas.size() > 1) {
    const auto [gmin, gmax] = std::minmax_element(gammas.begin(), gammas.end());
    result.boundary_selected =
        result.boundary_selected || result.best_gamma == *gmin || result.best_gamma == *gmax;
  }
  return result;
}

}  // namespace tvarnet
