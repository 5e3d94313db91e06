#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tvarnet/design.hpp"
#include "tvarnet/errors.hpp"
#include "tvarnet/windowing.hpp"

namespace tvarnet {

/// Group soft thresholding: 0 when ||v|| <= kappa, otherwise v shrunk by
/// kappa along its own direction.
inline Vector prox_group_l2(const Vector& v, double kappa) {
  if (kappa < 0.0) throw ArgumentError("prox threshold must be >= 0");
  const double n = v.norm();
  if (n <= kappa) return Vector::Zero(v.size());
  if (kappa == 0.0) return v;
  return (1.0 - kappa / n) * v;
}

namespace detail {

template <typename VecLike>
inline void prox_group_l2_inplace(VecLike&& v, double kappa) {
  const double n = v.norm();
  if (n <= kappa)
    v.setZero();
  else if (kappa > 0.0)
    v *= (1.0 - kappa / n);
}

}  // namespace detail

struct AdmmConfig {
  double lambda = 0.0;  // edge-sparsity weight
  double gamma = 0.0;   // difference (breakpoint) weight
  double rho = 1.0;
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  int max_iters = 5000;
  bool adapt_rho = false;  // residual balancing, off for reproducibility

  void validate() const {
    if (lambda < 0.0 || gamma < 0.0) throw ArgumentError("lambda and gamma must be >= 0");
    if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0))
      throw ArgumentError("tolerances must be positive");
    if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");
  }
};

/// Which groups the difference penalty shrinks: one group per edge filter
/// (the local-breakpoint criterion) or the entire coefficient block (the
/// global-breakpoint baseline).
enum class TvPenalty { kPerEdge, kWholeBlock };

/// Splitting variables of the scaled-form iteration. theta mirrors the block
/// differences DB (one fewer block); c mirrors B itself. u and v are the
/// scaled duals of the two constraints.
struct AdmmState {
  std::vector<Matrix> b, c, v;
  std::vector<Matrix> theta, u;
  std::vector<Matrix> theta_prev, c_prev;
  double rho = 1.0;
  int iterations = 0;

  void reset(int num_blocks, int dim, int p) {
    b.assign(num_blocks, Matrix::Zero(dim, p));
    c.assign(num_blocks, Matrix::Zero(dim, p));
    v.assign(num_blocks, Matrix::Zero(dim, p));
    theta.assign(std::max(0, num_blocks - 1), Matrix::Zero(dim, p));
    u.assign(std::max(0, num_blocks - 1), Matrix::Zero(dim, p));
    theta_prev.clear();
    c_prev.clear();
    iterations = 0;
  }

  bool compatible(int num_blocks, int dim, int p) const {
    return static_cast<int>(b.size()) == num_blocks && !b.empty() && b.front().rows() == dim &&
           b.front().cols() == p && static_cast<int>(theta.size()) == num_blocks - 1 &&
           c.size() == b.size() && v.size() == b.size() && u.size() == theta.size();
  }
};

struct SolveReport {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  double objective = 0.0;
  bool converged = false;
  double wall_time_s = 0.0;
};

/// Factorization of the B-update system matrix Z^T Z / rho + I + D^T D.
/// The matrix is block tridiagonal with -I off-diagonal blocks, so a block
/// Thomas sweep with one Cholesky pivot per block solves it exactly; the
/// identity term keeps every pivot positive definite. Built once per
/// (problem, rho) and reused across iterations.
class BlockTridiagSolver {
 public:
  BlockTridiagSolver(const std::vector<Matrix>& gram, double rho) {
    const int n = static_cast<int>(gram.size());
    const int dim = static_cast<int>(gram.front().rows());
    factors_.reserve(n);
    Matrix prev_inv;
    for (int t = 0; t < n; ++t) {
      const double deg = (n == 1) ? 0.0 : ((t == 0 || t == n - 1) ? 1.0 : 2.0);
      Matrix s = gram[t] / rho;
      s.diagonal().array() += 1.0 + deg;
      if (t > 0) s -= prev_inv;
      factors_.emplace_back(s);
      if (factors_.back().info() != Eigen::Success)
        throw NumericError("block pivot factorization failed at block " + std::to_string(t));
      if (t + 1 < n) prev_inv = factors_.back().solve(Matrix::Identity(dim, dim));
    }
  }

  /// Overwrites the right-hand-side blocks with the solution.
  void solve(std::vector<Matrix>& rhs) const {
    const int n = static_cast<int>(factors_.size());
    rhs[0] = factors_[0].solve(rhs[0]).eval();
    for (int t = 1; t < n; ++t) {
      Matrix tmp = rhs[t] + rhs[t - 1];
      rhs[t] = factors_[t].solve(tmp);
    }
    for (int t = n - 2; t >= 0; --t) rhs[t] += factors_[t].solve(rhs[t + 1]);
  }

 private:
  std::vector<Eigen::LLT<Matrix>> factors_;
};

/// Exact minimizer of the B subproblem:
/// (Z^T Z / rho + I + D^T D) B = Z^T Y / rho + C - V + D^T (Theta - U).
inline void b_update(AdmmState& state, const BlockProblem& problem,
                     const BlockTridiagSolver& factor, double rho) {
  const int n = problem.num_blocks();
  for (int t = 0; t < n; ++t) {
    state.b[t] = problem.cross[t] / rho + state.c[t] - state.v[t];
    if (t > 0) state.b[t] += state.theta[t - 1] - state.u[t - 1];
    if (t + 1 < n) state.b[t] -= state.theta[t] - state.u[t];
  }
  factor.solve(state.b);
}

/// Scaled-form stopping quantities: primal = ||(DB - Theta; B - C)||_F and
/// dual = rho ||D^T dTheta + dC||_F for the last (Theta, C) change.
inline std::pair<double, double> compute_residuals(const AdmmState& state) {
  const int n = static_cast<int>(state.b.size());
  double primal_sq = 0.0;
  for (int t = 0; t + 1 < n; ++t)
    primal_sq += (state.b[t + 1] - state.b[t] - state.theta[t]).squaredNorm();
  for (int t = 0; t < n; ++t) primal_sq += (state.b[t] - state.c[t]).squaredNorm();

  double dual_sq = 0.0;
  if (!state.c_prev.empty()) {
    for (int t = 0; t < n; ++t) {
      Matrix s = state.c[t] - state.c_prev[t];
      if (t > 0) s += state.theta[t - 1] - state.theta_prev[t - 1];
      if (t + 1 < n) s -= state.theta[t] - state.theta_prev[t];
      dual_sq += s.squaredNorm();
    }
  }
  return {std::sqrt(primal_sq), state.rho * std::sqrt(dual_sq)};
}

namespace detail {

inline void prox_blocks(std::vector<Matrix>& out, double kappa, TvPenalty mode, int num_nodes) {
  if (mode == TvPenalty::kWholeBlock) {
    for (auto& block : out) {
      const double norm = block.norm();
      if (norm <= kappa)
        block.setZero();
      else if (kappa > 0.0)
        block *= (1.0 - kappa / norm);
    }
    return;
  }
  for (auto& block : out)
    for (int i = 1; i <= num_nodes; ++i)
      for (int j = 1; j <= num_nodes; ++j)
        prox_group_l2_inplace(edge_group(block, i, j, num_nodes), kappa);
}

inline double group_norm_sum(const Matrix& block, int num_nodes) {
  double sum = 0.0;
  for (int i = 1; i <= num_nodes; ++i)
    for (int j = 1; j <= num_nodes; ++j) sum += edge_group(block, i, j, num_nodes).norm();
  return sum;
}

/// Objective through the accumulated normal-equation pieces:
/// 1/2 ||Y - Z B||_F^2 expands to 1/2 sum_n (y'y - 2 <B_n, G_n> + <B_n, H_n B_n>).
inline double objective_from_blocks(const BlockProblem& problem,
                                    const std::vector<Matrix>& blocks, double lambda,
                                    double gamma, TvPenalty mode) {
  double fit = 0.0;
  for (int n = 0; n < problem.num_blocks(); ++n) {
    fit += problem.target_sq[n] - 2.0 * (blocks[n].array() * problem.cross[n].array()).sum() +
           (blocks[n].array() * (problem.gram[n] * blocks[n]).array()).sum();
  }
  double reg = 0.0;
  for (int n = 0; n < problem.num_blocks(); ++n)
    if (lambda > 0.0) reg += lambda * group_norm_sum(blocks[n], problem.num_nodes);
  for (int n = 0; n + 1 < problem.num_blocks(); ++n) {
    if (gamma == 0.0) break;
    const Matrix diff = blocks[n + 1] - blocks[n];
    reg += (mode == TvPenalty::kWholeBlock) ? gamma * diff.norm()
                                            : gamma * group_norm_sum(diff, problem.num_nodes);
  }
  return 0.5 * fit + reg;
}

}  // namespace detail

struct SolveResult {
  CoefficientStack solution;  // the exactly group-sparse C iterate
  SolveReport report;
  AdmmState state;
};

/// Runs the scaled-form iteration until the residuals pass the combined
/// absolute/relative tolerances or max_iters is hit. The reported solution
/// is the C iterate, which the prox leaves exactly group-sparse; B is dense
/// up to tolerance and stays internal.
inline SolveResult admm_solve(const BlockProblem& problem, const AdmmConfig& cfg,
                              TvPenalty mode = TvPenalty::kPerEdge,
                              const AdmmState* warm = nullptr) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const int n = problem.num_blocks();
  const int dim = problem.dim();
  const int p = problem.num_nodes;
  if (n < 1) throw ArgumentError("problem has no blocks");

  AdmmState state;
  if (warm != nullptr && warm->compatible(n, dim, p)) {
    state = *warm;
    if (state.rho != cfg.rho) {
      // Scaled duals are y / rho; keep y fixed across the rho change.
      const double f = state.rho / cfg.rho;
      for (auto& m : state.u) m *= f;
      for (auto& m : state.v) m *= f;
    }
    state.iterations = 0;
  } else {
    state.reset(n, dim, p);
  }
  double rho = cfg.rho;
  state.rho = rho;

  BlockTridiagSolver factor(problem.gram, rho);
  const double constraint_entries = static_cast<double>(dim) * p * (2 * n - 1);
  const double variable_entries = static_cast<double>(dim) * p * n;

  SolveReport report;
  int k = 0;
  for (k = 1; k <= cfg.max_iters; ++k) {
    state.theta_prev = state.theta;
    state.c_prev = state.c;

    b_update(state, problem, factor, rho);

    for (int t = 0; t + 1 < n; ++t) state.theta[t] = state.b[t + 1] - state.b[t] + state.u[t];
    detail::prox_blocks(state.theta, cfg.gamma / rho, mode, p);

    for (int t = 0; t < n; ++t) state.c[t] = state.b[t] + state.v[t];
    detail::prox_blocks(state.c, cfg.lambda / rho, TvPenalty::kPerEdge, p);

    for (int t = 0; t + 1 < n; ++t) state.u[t] += state.b[t + 1] - state.b[t] - state.theta[t];
    for (int t = 0; t < n; ++t) state.v[t] += state.b[t] - state.c[t];

    const auto [primal, dual] = compute_residuals(state);
    if (!std::isfinite(primal) || !std::isfinite(dual))
      throw NumericError("non-finite iterate at iteration " + std::to_string(k));

    double ax_sq = 0.0, z_sq = 0.0, dual_feas_sq = 0.0;
    for (int t = 0; t + 1 < n; ++t) ax_sq += (state.b[t + 1] - state.b[t]).squaredNorm();
    for (int t = 0; t < n; ++t) ax_sq += state.b[t].squaredNorm();
    for (const auto& m : state.theta) z_sq += m.squaredNorm();
    for (const auto& m : state.c) z_sq += m.squaredNorm();
    for (int t = 0; t < n; ++t) {
      Matrix s = state.v[t];
      if (t > 0) s += state.u[t - 1];
      if (t + 1 < n) s -= state.u[t];
      dual_feas_sq += s.squaredNorm();
    }
    report.eps_primal = std::sqrt(constraint_entries) * cfg.eps_abs +
                        cfg.eps_rel * std::sqrt(std::max(ax_sq, z_sq));
    report.eps_dual = std::sqrt(variable_entries) * cfg.eps_abs +
                      cfg.eps_rel * rho * std::sqrt(dual_feas_sq);
    report.primal_residual = primal;
    report.dual_residual = dual;
    if (primal <= report.eps_primal && dual <= report.eps_dual) {
      report.converged = true;
      break;
    }

    if (cfg.adapt_rho) {
      double factor_change = 1.0;
      if (primal > 10.0 * dual)
        factor_change = 2.0;
      else if (dual > 10.0 * primal)
        factor_change = 0.5;
      if (factor_change != 1.0) {
        rho *= factor_change;
        for (auto& m : state.u) m /= factor_change;
        for (auto& m : state.v) m /= factor_change;
        state.rho = rho;
        factor = BlockTridiagSolver(problem.gram, rho);
      }
    }
  }
  state.iterations = std::min(k, cfg.max_iters);
  report.iterations = state.iterations;

  SolveResult result;
  result.solution.num_nodes = p;
  result.solution.order = problem.order;
  result.solution.blocks = state.c;
  for (const auto& block : result.solution.blocks)
    if (!block.allFinite())
      throw NumericError("non-finite iterate at iteration " + std::to_string(report.iterations));
  report.objective = detail::objective_from_blocks(problem, state.c, cfg.lambda, cfg.gamma, mode);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.report = report;
  result.state = std::move(state);
  return result;
}

/// Unwindowed solve: one coefficient block per target instant.
inline SolveResult admm_solve(const DesignMatrices& design, const AdmmConfig& cfg,
                              const AdmmState* warm = nullptr) {
  return admm_solve(build_block_problem(design), cfg, TvPenalty::kPerEdge, warm);
}

/// Windowed objective evaluated row by row over the masked fit rows:
/// 1/2 sum_t ||y_t - B_{n(t)}^T x_t||^2 + lambda GL + gamma TV.
inline double objective_value(const DesignMatrices& design, const WindowPartition& part,
                              const CoefficientStack& stack, double lambda, double gamma,
                              TvPenalty mode = TvPenalty::kPerEdge) {
  if (stack.num_blocks() != part.num_windows())
    throw ArgumentError("stack block count does not match the partition");
  double fit = 0.0;
  for (int k = 0; k < design.num_rows(); ++k) {
    if (!design.row_mask[k]) continue;
    const int w = part.index_of(design.target_time(k));
    fit += (design.targets.row(k) - design.regressors.row(k) * stack.blocks[w]).squaredNorm();
  }
  double reg = 0.0;
  for (const auto& block : stack.blocks)
    if (lambda > 0.0) reg += lambda * detail::group_norm_sum(block, design.num_nodes);
  for (int w = 0; w + 1 < stack.num_blocks(); ++w) {
    if (gamma == 0.0) break;
    const Matrix diff = stack.blocks[w + 1] - stack.blocks[w];
    reg += (mode == TvPenalty::kWholeBlock) ? gamma * diff.norm()
                                            : gamma * detail::group_norm_sum(diff, design.num_nodes);
  }
  return 0.5 * fit + reg;
}

/// Per-instant objective (one block per target instant).
inline double objective_value(const DesignMatrices& design, const CoefficientStack& stack,
                              double lambda, double gamma) {
  return objective_value(design, unit_partition(design.order, design.order + design.num_rows()),
                         stack, lambda, gamma, TvPenalty::kPerEdge);
}

}  // namespace tvarnet
