#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "support/reference_solver.hpp"
#include "support/test_helpers.hpp"
#include "tvarnet/admm.hpp"
#include "tvarnet/design.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/windowing.hpp"

using namespace tvarnet;
using testkit::dense_difference_operator;
using testkit::dense_objective;
using testkit::random_series;
using testkit::seeded_rng;
using testkit::unit_starts;

namespace {

CoefficientStack random_stack(int p, int order, int num_blocks, std::mt19937_64& rng,
                              double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  CoefficientStack stack;
  stack.num_nodes = p;
  stack.order = order;
  for (int n = 0; n < num_blocks; ++n) {
    Eigen::MatrixXd block(p * order, p);
    for (int r = 0; r < block.rows(); ++r)
      for (int c = 0; c < block.cols(); ++c) block(r, c) = normal(rng);
    stack.blocks.push_back(block);
  }
  return stack;
}

double group_lasso_norm(const CoefficientStack& stack) {
  double sum = 0.0;
  for (const auto& block : stack.blocks)
    for (int i = 1; i <= stack.num_nodes; ++i)
      for (int j = 1; j <= stack.num_nodes; ++j)
        sum += testkit::gather_group(block, i, j, stack.num_nodes).norm();
  return sum;
}

}  // namespace

TEST_CASE("build_design lays out lagged regressors and targets") {
  Eigen::MatrixXd values(2, 3);
  values << 1, 3, 5, 2, 4, 6;  // y_1=(1,2), y_2=(3,4), y_3=(5,6)
  MultivariateSeries series(values, default_node_labels(2));
  const DesignMatrices d = build_design(series, 1);
  REQUIRE(d.num_rows() == 2);
  CHECK(d.regressors(0, 0) == 1.0);
  CHECK(d.regressors(0, 1) == 2.0);
  CHECK(d.regressors(1, 0) == 3.0);
  CHECK(d.regressors(1, 1) == 4.0);
  CHECK(d.targets(0, 0) == 3.0);
  CHECK(d.targets(0, 1) == 4.0);
  CHECK(d.targets(1, 0) == 5.0);
  CHECK(d.targets(1, 1) == 6.0);
}

TEST_CASE("build_design with L = T-1 keeps a single target row") {
  auto rng = seeded_rng(7);
  const auto series = random_series(2, 6, rng);
  const DesignMatrices d = build_design(series, 5);
  CHECK(d.num_rows() == 1);
  CHECK(d.target_time(0) == 6);
  CHECK_THROWS_AS(build_design(series, 6), ArgumentError);
}

TEST_CASE("design rows reproduce one-step forecasts for a shared block") {
  auto rng = seeded_rng(11);
  const int p = 3, order = 2, t_max = 15;
  const auto series = random_series(p, t_max, rng);
  const auto coeffs = testkit::random_coefficients(p, order, t_max, {order + 1}, rng);
  const DesignMatrices d = build_design(series, order);
  const CoefficientStack stack = coefficients_to_stack(coeffs);
  for (int k = 0; k < d.num_rows(); ++k) {
    const Eigen::VectorXd via_design = (d.regressors.row(k) * stack.blocks[0]).transpose();
    const Eigen::VectorXd via_model = forecast_one_step(coeffs, series, d.target_time(k));
    CHECK((via_design - via_model).norm() < 1e-12);
  }
}

TEST_CASE("objective_value at zero equals half the target energy") {
  auto rng = seeded_rng(13);
  const auto series = random_series(2, 12, rng);
  const DesignMatrices d = build_design(series, 1);
  CoefficientStack zero;
  zero.num_nodes = 2;
  zero.order = 1;
  zero.blocks.assign(d.num_rows(), Eigen::MatrixXd::Zero(2, 2));
  const double expected = 0.5 * d.targets.squaredNorm();
  CHECK(objective_value(d, zero, 1.0, 1.0) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("time-invariant stacks pay no difference penalty") {
  auto rng = seeded_rng(17);
  const auto series = random_series(2, 10, rng);
  const DesignMatrices d = build_design(series, 1);
  auto one = random_stack(2, 1, 1, rng);
  CoefficientStack flat;
  flat.num_nodes = 2;
  flat.order = 1;
  flat.blocks.assign(d.num_rows(), one.blocks[0]);
  const double with_tv = objective_value(d, flat, 0.3, 123.0);
  const double without_tv = objective_value(d, flat, 0.3, 0.0);
  CHECK(with_tv == Catch::Approx(without_tv).epsilon(1e-12));
}

TEST_CASE("difference penalty equals the group-lasso norm of D B") {
  auto rng = seeded_rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 1 + int(rng() % 3);
    const int order = 1 + int(rng() % 3);
    const int blocks = 2 + int(rng() % 6);
    const auto stack = random_stack(p, order, blocks, rng);
    const int dim = p * order;

    // Apply the dense D column-wise and re-read the differences as blocks.
    const Eigen::MatrixXd d_op = dense_difference_operator(blocks, dim);
    CoefficientStack diffs;
    diffs.num_nodes = p;
    diffs.order = order;
    for (int n = 0; n + 1 < blocks; ++n) {
      Eigen::MatrixXd block(dim, p);
      for (int c = 0; c < p; ++c) {
        Eigen::VectorXd col(blocks * dim);
        for (int m = 0; m < blocks; ++m) col.segment(m * dim, dim) = stack.blocks[m].col(c);
        block.col(c) = (d_op * col).segment(n * dim, dim);
      }
      diffs.blocks.push_back(block);
    }

    double tv = 0.0;
    for (int n = 0; n + 1 < blocks; ++n) {
      const Eigen::MatrixXd diff = stack.blocks[n + 1] - stack.blocks[n];
      for (int i = 1; i <= p; ++i)
        for (int j = 1; j <= p; ++j) tv += testkit::gather_group(diff, i, j, p).norm();
    }
    const double gl_of_db = group_lasso_norm(diffs);
    CHECK(std::abs(tv - gl_of_db) <= 1e-12 * std::max(1.0, std::abs(gl_of_db)));
  }
}

TEST_CASE("objective_value agrees with the dense evaluator") {
  auto rng = seeded_rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    const int p = 2, order = 2, t_max = 14;
    const auto series = random_series(p, t_max, rng);
    const DesignMatrices d = build_design(series, order);
    const auto stack = random_stack(p, order, d.num_rows(), rng);
    const double lib = objective_value(d, stack, 0.2, 0.4);
    const double dense =
        dense_objective(series, order, unit_starts(order, t_max), stack.blocks, 0.2, 0.4);
    CHECK(lib == Catch::Approx(dense).epsilon(1e-10));
  }
}

TEST_CASE("prox_group_l2 examples") {
  CHECK(prox_group_l2(Eigen::VectorXd::Zero(3), 1.0).norm() == 0.0);

  Eigen::VectorXd v(2);
  v << 3.0, 4.0;
  const Eigen::VectorXd shrunk = prox_group_l2(v, 2.5);
  CHECK(shrunk[0] == Catch::Approx(1.5).epsilon(1e-15));
  CHECK(shrunk[1] == Catch::Approx(2.0).epsilon(1e-15));

  const Eigen::VectorXd same = prox_group_l2(v, 0.0);
  CHECK(same == v);
  CHECK_THROWS_AS(prox_group_l2(v, -1.0), ArgumentError);
}

TEST_CASE("prox_group_l2 norm identity and nonexpansiveness") {
  auto rng = seeded_rng(29);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + int(rng() % 6);
    Eigen::VectorXd a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = normal(rng);
      b[k] = normal(rng);
    }
    const double kappa = unif(rng);
    const Eigen::VectorXd pa = prox_group_l2(a, kappa);
    const Eigen::VectorXd pb = prox_group_l2(b, kappa);
    CHECK(pa.norm() == Catch::Approx(std::max(0.0, a.norm() - kappa)).margin(1e-13));
    CHECK((pa - pb).norm() <= (a - b).norm() + 1e-13);
  }
}

TEST_CASE("b_update with zero right-hand side stays at zero") {
  auto rng = seeded_rng(31);
  const auto series = random_series(2, 10, rng);
  DesignMatrices d = build_design(series, 1);
  d.targets.setZero();
  const BlockProblem problem = build_block_problem(d);
  AdmmState state;
  state.reset(problem.num_blocks(), problem.dim(), problem.num_nodes);
  const BlockTridiagSolver factor(problem.gram, 1.0);
  b_update(state, problem, factor, 1.0);
  for (const auto& block : state.b) CHECK(block.norm() == 0.0);
}

TEST_CASE("b_update on a single block matches a dense solve") {
  auto rng = seeded_rng(37);
  const int p = 2, order = 2;
  const auto series = random_series(p, order + 1, rng);
  const DesignMatrices d = build_design(series, order);
  REQUIRE(d.num_rows() == 1);
  const BlockProblem problem = build_block_problem(d);

  AdmmState state;
  state.reset(1, problem.dim(), p);
  std::normal_distribution<double> normal;
  for (auto* blocks : {&state.c, &state.v})
    for (auto& m : *blocks)
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);

  const double rho = 0.7;
  const BlockTridiagSolver factor(problem.gram, rho);
  b_update(state, problem, factor, rho);

  const Eigen::MatrixXd system =
      problem.gram[0] / rho + Eigen::MatrixXd::Identity(problem.dim(), problem.dim());
  const Eigen::MatrixXd rhs = problem.cross[0] / rho + state.c[0] - state.v[0];
  const Eigen::MatrixXd direct = system.ldlt().solve(rhs);
  CHECK((state.b[0] - direct).norm() < 1e-12 * std::max(1.0, direct.norm()));
}

TEST_CASE("structured b_update matches the dense system solve") {
  auto rng = seeded_rng(41);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0, 1);
  for (int rep = 0; rep < 10; ++rep) {
    const int p = 1 + int(rng() % 3);
    const int order = 1 + int(rng() % 2);
    const int t_max = order + 2 + int(rng() % 10);
    const auto series = random_series(p, t_max, rng);
    const DesignMatrices d = build_design(series, order);
    const BlockProblem problem = build_block_problem(d);
    const int n = problem.num_blocks();
    const int dim = problem.dim();

    AdmmState state;
    state.reset(n, dim, p);
    for (auto* blocks : {&state.c, &state.v, &state.theta, &state.u})
      for (auto& m : *blocks)
        for (int r = 0; r < m.rows(); ++r)
          for (int c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);

    const double rho = 0.5 + 0.5 * unif(rng);
    const BlockTridiagSolver factor(problem.gram, rho);

    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n * dim, n * dim);
    for (int t = 0; t < n; ++t)
      system.block(t * dim, t * dim, dim, dim) += problem.gram[t] / rho;
    if (n > 1) {
      const Eigen::MatrixXd d_op = dense_difference_operator(n, dim);
      system += d_op.transpose() * d_op;
    }
    Eigen::MatrixXd rhs(n * dim, p);
    for (int t = 0; t < n; ++t) {
      Eigen::MatrixXd r = problem.cross[t] / rho + state.c[t] - state.v[t];
      if (t > 0) r += state.theta[t - 1] - state.u[t - 1];
      if (t + 1 < n) r -= state.theta[t] - state.u[t];
      rhs.middleRows(t * dim, dim) = r;
    }
    const Eigen::MatrixXd dense = system.ldlt().solve(rhs);

    b_update(state, problem, factor, rho);
    double err = 0.0, scale = 0.0;
    for (int t = 0; t < n; ++t) {
      err += (state.b[t] - dense.middleRows(t * dim, dim)).squaredNorm();
      scale += dense.middleRows(t * dim, dim).squaredNorm();
    }
    CHECK(std::sqrt(err) <= 1e-10 * std::max(1.0, std::sqrt(scale)));
  }
}

TEST_CASE("unregularized solve matches per-block least squares") {
  auto rng = seeded_rng(43);
  const int p = 2, order = 1, t_max = 41;
  const auto series = random_series(p, t_max, rng);
  const DesignMatrices d = build_design(series, order);
  const WindowPartition part = uniform_partition(order, t_max, 10);
  const BlockProblem problem = collapse_problem(d, part);

  AdmmConfig cfg;
  cfg.eps_abs = 1e-10;
  cfg.eps_rel = 1e-8;
  cfg.max_iters = 100000;
  const auto result = admm_solve(problem, cfg);
  REQUIRE(result.report.converged);

  for (int n = 0; n < problem.num_blocks(); ++n) {
    const Eigen::MatrixXd ls = problem.gram[n].ldlt().solve(problem.cross[n]);
    CHECK((result.solution.blocks[n] - ls).norm() <= 1e-6 * std::max(1.0, ls.norm()));
  }
}

TEST_CASE("an overwhelming sparsity weight zeroes the solution") {
  auto rng = seeded_rng(47);
  const auto series = random_series(3, 25, rng);
  const DesignMatrices d = build_design(series, 2);
  const BlockProblem problem = build_block_problem(d);
  double scale = 0.0;
  for (const auto& g : problem.cross) scale = std::max(scale, g.cwiseAbs().maxCoeff());

  AdmmConfig cfg;
  cfg.lambda = 1e6 * scale;
  cfg.gamma = 0.01;
  const auto result = admm_solve(problem, cfg);
  double norm_sq = 0.0;
  for (const auto& block : result.solution.blocks) norm_sq += block.squaredNorm();
  CHECK(std::sqrt(norm_sq) < 1e-8);
}

TEST_CASE("solver objective matches the independent primal-dual reference") {
  auto rng = seeded_rng(53);
  const double weights[] = {0.01, 0.1, 1.0};
  for (int rep = 0; rep < 3; ++rep) {
    const int p = 2 + rep % 2;
    const int order = 1 + rep % 2;
    const int t_max = 20 + 10 * rep;
    const auto series = random_series(p, t_max, rng, 0.8);
    const double lambda = weights[rep % 3];
    const double gamma = weights[(rep + 1) % 3];

    AdmmConfig cfg;
    cfg.lambda = lambda;
    cfg.gamma = gamma;
    cfg.eps_abs = 1e-9;
    cfg.eps_rel = 1e-7;
    cfg.max_iters = 100000;
    const auto result = admm_solve(build_design(series, order), cfg);
    REQUIRE(result.report.converged);

    const auto starts = unit_starts(order, t_max);
    const auto ref = testkit::reference_solve(series, order, starts, lambda, gamma);
    const double obj =
        dense_objective(series, order, starts, result.solution.blocks, lambda, gamma);
    CHECK(std::abs(obj - ref.objective) <= 1e-4 * std::abs(ref.objective));
  }
}

TEST_CASE("reference solver self-checks") {
  auto rng = seeded_rng(59);
  const int p = 2, order = 1, t_max = 18;
  const auto series = random_series(p, t_max, rng);
  const auto starts = unit_starts(order, t_max);

  SECTION("unregularized limit is no worse than per-block least squares") {
    const auto ref = testkit::reference_solve(series, order, starts, 0.0, 0.0);
    const BlockProblem problem = build_block_problem(build_design(series, order));
    std::vector<Eigen::MatrixXd> ls;
    for (int n = 0; n < problem.num_blocks(); ++n)
      ls.push_back(Eigen::MatrixXd(
          (problem.gram[n] + 1e-12 * Eigen::MatrixXd::Identity(problem.dim(), problem.dim()))
              .ldlt()
              .solve(problem.cross[n])));
    const double ls_obj = dense_objective(series, order, starts, ls, 0.0, 0.0);
    CHECK(ref.objective <= ls_obj + 1e-8);
  }

  SECTION("stationarity certificate is tiny at the reference solution") {
    const auto ref = testkit::reference_solve(series, order, starts, 0.02, 0.02);
    const double kkt =
        testkit::kkt_stationarity_residual(series, order, starts, ref.blocks, 0.02, 0.02);
    CHECK(kkt < 1e-6);
  }
}

TEST_CASE("objective at the sparse iterate decreases first to last") {
  auto rng = seeded_rng(61);
  for (int rep = 0; rep < 4; ++rep) {
    const int p = 2, order = 1, t_max = 16 + 4 * rep;
    const auto series = random_series(p, t_max, rng);
    const BlockProblem problem = build_block_problem(build_design(series, order));
    AdmmConfig cfg;
    cfg.lambda = 0.1;
    cfg.gamma = 0.1;

    AdmmConfig first = cfg;
    first.max_iters = 1;
    const auto after_one = admm_solve(problem, first);
    const auto final_result = admm_solve(problem, cfg);
    const double obj_first = detail::objective_from_blocks(problem, after_one.solution.blocks,
                                                           0.1, 0.1, TvPenalty::kPerEdge);
    const double obj_last = detail::objective_from_blocks(problem, final_result.solution.blocks,
                                                          0.1, 0.1, TvPenalty::kPerEdge);
    CHECK(obj_last <= obj_first + 1e-10);
  }
}

TEST_CASE("scaling the targets scales the unregularized solution") {
  auto rng = seeded_rng(67);
  const auto series = random_series(2, 30, rng);
  DesignMatrices d = build_design(series, 1);
  const WindowPartition part = uniform_partition(1, 30, 29);
  AdmmConfig cfg;
  cfg.eps_abs = 1e-11;
  cfg.eps_rel = 1e-9;
  cfg.max_iters = 100000;

  const auto base = admm_solve(collapse_problem(d, part), cfg);
  const double alpha = 3.5;
  d.targets *= alpha;
  const auto scaled = admm_solve(collapse_problem(d, part), cfg);
  CHECK((scaled.solution.blocks[0] - alpha * base.solution.blocks[0]).norm() <
        1e-6 * std::max(1.0, base.solution.blocks[0].norm()));
}

TEST_CASE("relabeling nodes permutes the solution accordingly") {
  auto rng = seeded_rng(71);
  const int p = 3, order = 1, t_max = 24;
  const auto series = random_series(p, t_max, rng);
  const std::vector<int> perm = {2, 0, 1};  // new row index of old row r

  Eigen::MatrixXd permuted(p, t_max);
  for (int r = 0; r < p; ++r) permuted.row(perm[r]) = series.values.row(r);
  const MultivariateSeries relabeled(permuted, default_node_labels(p));

  AdmmConfig cfg;
  cfg.lambda = 0.05;
  cfg.gamma = 0.05;
  cfg.eps_abs = 1e-10;
  cfg.eps_rel = 1e-8;
  cfg.max_iters = 100000;
  const WindowPartition part = uniform_partition(order, t_max, 6);
  const auto a = admm_solve(collapse_problem(build_design(series, order), part), cfg);
  const auto b = admm_solve(collapse_problem(build_design(relabeled, order), part), cfg);
  const auto ca = expand_solution(a.solution, part);
  const auto cb = expand_solution(b.solution, part);
  for (int n = 0; n < ca.num_segments(); ++n)
    for (int l = 1; l <= order; ++l)
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          CHECK(ca.lag_matrix(n, l)(i, j) ==
                Catch::Approx(cb.lag_matrix(n, l)(perm[i], perm[j])).margin(1e-7));
}

TEST_CASE("residuals vanish at a fixed point and not before") {
  auto rng = seeded_rng(73);
  const auto series = random_series(2, 20, rng);
  const BlockProblem problem = build_block_problem(build_design(series, 1));

  AdmmConfig tight;
  tight.lambda = 0.1;
  tight.gamma = 0.1;
  tight.eps_abs = 1e-13;
  tight.eps_rel = 1e-13;
  tight.max_iters = 500000;
  const auto solved = admm_solve(problem, tight);
  REQUIRE(solved.report.converged);

  AdmmConfig one = tight;
  one.max_iters = 1;
  const auto next = admm_solve(problem, one, TvPenalty::kPerEdge, &solved.state);
  const auto [primal, dual] = compute_residuals(next.state);
  CHECK(primal < 1e-12);
  CHECK(dual < 1e-12);

  const auto cold = admm_solve(problem, one);
  const auto [primal_cold, dual_cold] = compute_residuals(cold.state);
  CHECK(primal_cold > 0.0);
}

TEST_CASE("residual sequence reaches tolerance within the iteration budget") {
  auto rng = seeded_rng(79);
  const auto series = random_series(3, 30, rng);
  AdmmConfig cfg;
  cfg.lambda = 0.2;
  cfg.gamma = 0.2;
  cfg.max_iters = 10000;
  const auto result = admm_solve(build_design(series, 2), cfg);
  CHECK(result.report.converged);
  CHECK(result.report.iterations < 10000);
  CHECK(result.report.primal_residual <= result.report.eps_primal);
  CHECK(result.report.dual_residual <= result.report.eps_dual);
}

TEST_CASE("warm starts reproduce the cold-start solution") {
  auto rng = seeded_rng(83);
  const auto series = random_series(2, 25, rng);
  const BlockProblem problem = build_block_problem(build_design(series, 1));
  AdmmConfig cfg;
  cfg.lambda = 0.3;
  cfg.gamma = 0.3;
  cfg.eps_abs = 1e-10;
  cfg.eps_rel = 1e-8;
  cfg.max_iters = 100000;
  const auto cold = admm_solve(problem, cfg);

  AdmmConfig near = cfg;
  near.lambda = 0.25;
  const auto stepping_stone = admm_solve(problem, near);
  const auto warm = admm_solve(problem, cfg, TvPenalty::kPerEdge, &stepping_stone.state);
  CHECK(warm.report.iterations <= cold.report.iterations);
  double diff = 0.0;
  for (int n = 0; n < problem.num_blocks(); ++n)
    diff += (warm.solution.blocks[n] - cold.solution.blocks[n]).squaredNorm();
  CHECK(std::sqrt(diff) < 1e-5);
}
