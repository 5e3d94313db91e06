// Command-line front end: simulate synthetic TVAR data, fit the local- or
// global-breakpoint criterion, cross-validate the regularization weights,
// evaluate an estimate against a ground truth, and export per-edge
// trajectory reports.
//
// Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
// 4 I/O error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvarnet/tvarnet.hpp"

namespace fs = std::filesystem;
using namespace tvarnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitIo = 4;

struct SolverFlags {
  double rho = 1.0;
  int max_iters = 5000;
  double tol_abs = 1e-6;
  double tol_rel = 1e-4;

  AdmmConfig to_config(double lambda, double gamma) const {
    AdmmConfig cfg;
    cfg.lambda = lambda;
    cfg.gamma = gamma;
    cfg.rho = rho;
    cfg.max_iters = max_iters;
    cfg.eps_abs = tol_abs;
    cfg.eps_rel = tol_rel;
    return cfg;
  }
};

void add_solver_flags(CLI::App* cmd, SolverFlags& flags) {
  cmd->add_option("--rho", flags.rho, "ADMM penalty parameter");
  cmd->add_option("--max-iters", flags.max_iters, "iteration cap");
  cmd->add_option("--tol-abs", flags.tol_abs, "absolute stopping tolerance");
  cmd->add_option("--tol-rel", flags.tol_rel, "relative stopping tolerance");
}

TvPenalty parse_criterion(const std::string& name) {
  if (name == "local") return TvPenalty::kPerEdge;
  if (name == "global") return TvPenalty::kWholeBlock;
  throw ArgumentError("--criterion must be 'local' or 'global'");
}

std::pair<int, int> parse_holdout(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ArgumentError("--holdout must be 'first:last' with 1-based inclusive times");
  try {
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ArgumentError("cannot parse --holdout range '" + text + "'");
  }
}

/// Most common segment length of an estimate; used as the default matching
/// tolerance because windowing quantizes change locations to boundaries.
int typical_segment_length(const TvarCoefficients& c) {
  std::map<int, int> counts;
  for (int n = 0; n < c.num_segments(); ++n)
    ++counts[c.segment_end(n) - c.segment_starts[n] + 1];
  int best_len = 1, best_count = 0;
  for (const auto& [len, count] : counts)
    if (count > best_count) {
      best_len = len;
      best_count = count;
    }
  return best_len;
}

// --- simulate ---------------------------------------------------------------

struct SimulateOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateOptions& opt) {
  GeneratorConfig cfg;
  if (!opt.config_path.empty())
    cfg = generator_config_from_json(read_text_file(opt.config_path),
                                     fs::path(opt.config_path).filename().string());
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.validate();

  Rng rng(cfg.seed);
  const GroundTruth truth = generate_coefficient_path(cfg, rng);
  const MultivariateSeries series = simulate_series(truth, cfg.innovation_variance, rng);

  fs::create_directories(opt.out_dir);
  const fs::path dir(opt.out_dir);
  save_series_csv((dir / "series.csv").string(), series);
  save_coefficients_json((dir / "truth_coeffs.json").string(), truth.coeffs);
  save_breakpoints_csv((dir / "truth_breakpoints.csv").string(), truth.breakpoints);
  write_text_file((dir / "config_resolved.json").string(), generator_config_to_json(cfg));
  std::cout << "wrote series (" << series.num_nodes() << "x" << series.num_samples() << "), "
            << truth.breakpoints.size() << " breakpoint triplets to " << dir.string() << "\n";
  return kExitOk;
}

// --- fit --------------------------------------------------------------------

struct FitOptions {
  std::string series_path;
  double lambda = 0.0;
  double gamma = 0.0;
  int order = 1;
  int window_len = 1;
  std::string criterion = "local";
  SolverFlags solver;
  std::string coeffs_out = "estimate.json";
  std::string report_out = "solve_report.json";
  bool gamma_given = false;
};

int cmd_fit(const FitOptions& opt) {
  const TvPenalty mode = parse_criterion(opt.criterion);
  if (mode == TvPenalty::kWholeBlock && opt.gamma_given)
    throw ArgumentError("the global criterion uses --lambda only; drop --gamma");
  const MultivariateSeries series = load_series_csv(opt.series_path);
  const DesignMatrices design = build_design(series, opt.order);
  const WindowPartition part =
      uniform_partition(opt.order, series.num_samples(), opt.window_len);

  SolveResult result;
  if (mode == TvPenalty::kWholeBlock) {
    result = baseline_global_solve(design, opt.lambda, part, opt.solver.to_config(0.0, 0.0));
  } else {
    result = admm_solve(collapse_problem(design, part),
                        opt.solver.to_config(opt.lambda, opt.gamma));
  }
  const TvarCoefficients estimate = expand_solution(result.solution, part);
  save_coefficients_json(opt.coeffs_out, estimate);
  write_text_file(opt.report_out, solve_report_to_json(result.report));
  if (!result.report.converged) {
    std::cerr << "solver did not converge within " << result.report.iterations
              << " iterations (primal " << result.report.primal_residual << ", dual "
              << result.report.dual_residual << "); outputs written\n";
    return kExitNoConvergence;
  }
  std::cout << "fit converged in " << result.report.iterations << " iterations, objective "
            << format_double(result.report.objective) << "\n";
  return kExitOk;
}

// --- cv ---------------------------------------------------------------------

struct CvOptions {
  std::string series_path;
  int order = 1;
  int window_len = 1;
  int folds = 5;
  std::string grid_path;
  std::vector<double> lambdas;
  std::vector<double> gammas;
  std::string criterion = "local";
  SolverFlags solver;
  std::string table_out = "cv_scores.csv";
  std::string best_out = "cv_best.json";
  std::string fit_out;
  std::string report_out;
};

int cmd_cv(const CvOptions& opt) {
  const TvPenalty mode = parse_criterion(opt.criterion);
  const MultivariateSeries series = load_series_csv(opt.series_path);
  const DesignMatrices design = build_design(series, opt.order);
  const WindowPartition part =
      uniform_partition(opt.order, series.num_samples(), opt.window_len);
  const CvPlan plan = make_cv_plan(opt.order, series.num_samples(), opt.folds);

  GridSpec grid;
  if (!opt.grid_path.empty()) {
    grid = grid_from_csv(read_text_file(opt.grid_path),
                         fs::path(opt.grid_path).filename().string());
  } else if (!opt.lambdas.empty()) {
    grid.lambdas = opt.lambdas;
    grid.gammas = opt.gammas.empty() ? opt.lambdas : opt.gammas;
    grid.validate();
  } else {
    grid = default_grid(design, part);
  }

  const GridSearchResult result =
      grid_search(series, part, grid, plan, opt.solver.to_config(0.0, 0.0), mode);
  write_text_file(opt.table_out, score_table_to_csv(result.table));
  write_text_file(opt.best_out,
                  best_point_to_json(result.best_lambda, result.best_gamma, result.best_score));
  if (result.boundary_selected)
    std::cerr << "warning: selected point sits on the grid boundary; consider widening the grid\n";
  std::cout << "best lambda " << format_double(result.best_lambda) << ", gamma "
            << format_double(result.best_gamma) << ", score "
            << format_double(result.best_score) << "\n";

  if (!opt.fit_out.empty()) {
    FitOptions fit;
    fit.series_path = opt.series_path;
    fit.lambda = result.best_lambda;
    fit.gamma = result.best_gamma;
    fit.order = opt.order;
    fit.window_len = opt.window_len;
    fit.criterion = opt.criterion;
    fit.solver = opt.solver;
    fit.coeffs_out = opt.fit_out;
    fit.report_out = opt.report_out.empty()
                         ? (fs::path(opt.fit_out).replace_extension().string() + "_report.json")
                         : opt.report_out;
    return cmd_fit(fit);
  }
  return kExitOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateOptions {
  std::string estimate_path;
  std::string truth_path;
  std::string series_path;
  std::string holdout;
  double bp_tol = -1.0;       // negative = default heuristic
  int bp_time_tol = -1;       // negative = typical window length
  double zero_tol = kEdgeZeroTol;
  std::string out = "metrics.json";
};

int cmd_evaluate(const EvaluateOptions& opt) {
  const TvarCoefficients estimate = load_coefficients_json(opt.estimate_path);
  const TvarCoefficients truth = load_coefficients_json(opt.truth_path);
  const MultivariateSeries series = load_series_csv(opt.series_path);

  const double bp_tol = opt.bp_tol >= 0.0 ? opt.bp_tol : default_detection_tol(estimate);
  const int time_tol = opt.bp_time_tol >= 0 ? opt.bp_time_tol : typical_segment_length(estimate);
  const BreakpointSet detected = detect_local_breakpoints(estimate, bp_tol);
  const BreakpointSet truth_bps = local_breakpoints_of(truth, 0.0);

  int t_begin = estimate.order + 1, t_end = estimate.num_samples;
  if (!opt.holdout.empty()) std::tie(t_begin, t_end) = parse_holdout(opt.holdout);

  RecoveryMetrics metrics;
  metrics.breakpoints = match_breakpoints(detected, truth_bps, time_tol);
  metrics.edges = edge_recovery(estimate, truth, opt.zero_tol);
  metrics.nmse = forecast_nmse(estimate, series, t_begin, t_end);
  write_text_file(opt.out, metrics_to_json(metrics));
  std::cout << "breakpoints P/R/F1 " << metrics.breakpoints.precision << "/"
            << metrics.breakpoints.recall << "/" << metrics.breakpoints.f1 << ", edges F1 "
            << metrics.edges.f1 << ", nmse " << metrics.nmse << "\n";
  return kExitOk;
}

// --- report -----------------------------------------------------------------

struct ReportOptions {
  std::string estimate_path;
  std::string out = "edge_report.csv";
};

int cmd_report(const ReportOptions& opt) {
  const TvarCoefficients estimate = load_coefficients_json(opt.estimate_path);
  write_text_file(opt.out, estimate_report_csv(estimate));
  std::cout << "wrote " << estimate.num_nodes * estimate.num_nodes * estimate.num_segments()
            << " rows to " << opt.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic network identification from non-stationary VAR time series"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic TVAR realization");
  simulate->add_option("--config", sim.config_path, "generator config JSON")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out-dir", sim.out_dir, "output directory");
  std::uint64_t seed_value = 0;
  auto* seed_opt = simulate->add_option("--seed", seed_value, "RNG seed (overrides config)");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit one (lambda, gamma) point");
  fit_cmd->add_option("--series", fit.series_path, "series CSV")->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--lambda", fit.lambda, "edge-sparsity weight")->required();
  auto* gamma_opt = fit_cmd->add_option("--gamma", fit.gamma, "breakpoint weight");
  fit_cmd->add_option("--order", fit.order, "model order L")->required();
  fit_cmd->add_option("--window-len", fit.window_len, "window length (1 = per instant)");
  fit_cmd->add_option("--criterion", fit.criterion, "local | global");
  fit_cmd->add_option("--coeffs-out", fit.coeffs_out, "estimated coefficients JSON");
  fit_cmd->add_option("--report-out", fit.report_out, "solve report JSON");
  add_solver_flags(fit_cmd, fit.solver);

  CvOptions cv;
  auto* cv_cmd = app.add_subcommand("cv", "grid search with interleaved cross-validation");
  cv_cmd->add_option("--series", cv.series_path, "series CSV")->required()
      ->check(CLI::ExistingFile);
  cv_cmd->add_option("--order", cv.order, "model order L")->required();
  cv_cmd->add_option("--window-len", cv.window_len, "window length");
  cv_cmd->add_option("--folds", cv.folds, "number of interleaved folds M");
  cv_cmd->add_option("--grid", cv.grid_path, "grid CSV (lambda,gamma rows)")
      ->check(CLI::ExistingFile);
  cv_cmd->add_option("--lambdas", cv.lambdas, "explicit lambda list")->delimiter(',');
  cv_cmd->add_option("--gammas", cv.gammas, "explicit gamma list")->delimiter(',');
  cv_cmd->add_option("--criterion", cv.criterion, "local | global");
  cv_cmd->add_option("--table-out", cv.table_out, "score table CSV");
  cv_cmd->add_option("--best-out", cv.best_out, "selected point JSON");
  cv_cmd->add_option("--fit-out", cv.fit_out, "chain a final fit to this coefficients JSON");
  cv_cmd->add_option("--report-out", cv.report_out, "solve report for the chained fit");
  add_solver_flags(cv_cmd, cv.solver);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "recovery metrics against a ground truth");
  eval_cmd->add_option("--estimate", eval.estimate_path, "estimated coefficients JSON")
      ->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", eval.truth_path, "truth coefficients JSON")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--series", eval.series_path, "series CSV")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--holdout", eval.holdout, "forecast range 'first:last' (1-based)");
  eval_cmd->add_option("--bp-tol", eval.bp_tol, "detection tolerance (default: heuristic)");
  eval_cmd->add_option("--bp-time-tol", eval.bp_time_tol,
                       "matching tolerance in samples (default: window length)");
  eval_cmd->add_option("--zero-tol", eval.zero_tol, "edge-membership tolerance");
  eval_cmd->add_option("--out", eval.out, "metrics JSON");

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "per-edge trajectory CSV");
  rep_cmd->add_option("--estimate", rep.estimate_path, "coefficients JSON")->required()
      ->check(CLI::ExistingFile);
  rep_cmd->add_option("--out", rep.out, "report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*simulate) {
      if (seed_opt->count() > 0) sim.seed = seed_value;
      return cmd_simulate(sim);
    }
    if (*fit_cmd) {
      fit.gamma_given = gamma_opt->count() > 0;
      return cmd_fit(fit);
    }
    if (*cv_cmd) return cmd_cv(cv);
    if (*eval_cmd) return cmd_evaluate(eval);
    if (*rep_cmd) return cmd_report(rep);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
