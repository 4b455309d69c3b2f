#include "dramatic/pipeline.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/rng.h"

namespace dramatic {

namespace {

// Streams split off the pipeline seed.
enum : std::uint64_t { kStreamAlphaCv = 1, kStreamGammaCv = 2, kStreamKappaCv = 3 };

void Absorb(const NuisanceFit& fit, FitStats* stats) {
  ++stats->fits;
  stats->max_kkt = std::max(stats->max_kkt, fit.kkt_residual);
  stats->max_seconds = std::max(stats->max_seconds, fit.seconds);
}

// The chosen constant followed by the larger grid values; an explicit
// override is never escalated.
std::vector<double> EscalationGrid(const PipelineOptions& options, double chosen) {
  std::vector<double> out = {chosen};
  if (options.kappa) return out;
  for (double k : options.kappa_grid) {
    if (k > chosen) out.push_back(k);
  }
  return out;
}

template <typename Fn>
auto WithEscalation(const std::vector<double>& grid, double* kappa, Fn fit) {
  for (std::size_t k = 0;; ++k) {
    try {
      *kappa = grid[k];
      return fit(grid[k]);
    } catch (const SolverError&) {
      if (k + 1 == grid.size()) throw;
    }
  }
}

}  // namespace

std::vector<double> PreliminaryLambdaGrid(const Dataset& d, int count) {
  const double scale = std::sqrt(std::log(std::max(d.p(), 2)) / d.n());
  return LogSpacedGrid(0.01 * scale, 0.5 * scale, count);
}

std::pair<double, double> SelectPreliminaryLambdas(const Dataset& d, int folds, int grid_size,
                                                   std::uint64_t seed,
                                                   const SolverOptions& solver) {
  const std::vector<double> grid = PreliminaryLambdaGrid(d, grid_size);
  const CounterRng master(seed);
  const double la = CrossValidateLambda(DensityRatioProblem(d, Vector::Zero(d.dim())), grid,
                                        folds, master.Split(kStreamAlphaCv)(), solver);
  const double lg = CrossValidateLambda(ImputationProblem(d, Vector::Zero(d.dim())), grid,
                                        folds, master.Split(kStreamGammaCv)(), solver);
  return {la, lg};
}

double SelectKappa(const Dataset& d, const PreliminaryFits& prelim,
                   const std::vector<double>& grid, int folds, std::uint64_t seed,
                   const SolverOptions& solver) {
  if (grid.empty()) throw ValidationError("empty calibration-constant grid");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw ValidationError("calibration-constant grid must be ascending");
  }
  if (grid.size() == 1) return grid[0];
  PenalizedProblem alpha = DensityRatioProblem(d, prelim.alpha.coef);
  const Vector eta_g = d.pooled_x() * prelim.gamma.coef;
  alpha.sample_weights = eta_g.unaryExpr([](double v) { return LogisticDeriv(v); });
  PenalizedProblem gamma = ImputationProblem(d, prelim.gamma.coef);
  gamma.sample_weights = DensityRatioValues(d, prelim.alpha.coef);

  const double base_a = CalibrationLambda(1.0, alpha, d.p());
  const double base_g = CalibrationLambda(1.0, gamma, d.p());
  std::vector<double> grid_a, grid_g;
  for (double k : grid) {
    grid_a.push_back(k * base_a);
    grid_g.push_back(k * base_g);
  }
  const CounterRng master(seed);
  const std::uint64_t fold_seed = master.Split(kStreamKappaCv)();
  const std::vector<double> loss_a = CrossValidatedLosses(alpha, grid_a, folds, fold_seed, solver);
  const std::vector<double> loss_g = CrossValidatedLosses(gamma, grid_g, folds, fold_seed, solver);
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (loss_a[k] + loss_g[k] <= loss_a[best] + loss_g[best]) best = k;
  }
  return grid[best];
}

void CheckLabels(const Dataset& d) {
  const double ones = d.source_y().sum();
  if (ones == 0.0 || ones == static_cast<double>(d.n())) {
    throw EstimationError("degenerate labels: source labels are all " +
                          std::string(ones == 0.0 ? "0" : "1"));
  }
}

PipelineResult RunDramatic(const Dataset& d, const PipelineOptions& options) {
  CheckLabels(d);
  PipelineResult out;
  if (options.lambda_alpha && options.lambda_gamma) {
    out.lambda_alpha = *options.lambda_alpha;
    out.lambda_gamma = *options.lambda_gamma;
  } else {
    const auto [la, lg] = SelectPreliminaryLambdas(d, options.cv_folds, options.lambda_grid_size,
                                                   options.seed, options.solver);
    out.lambda_alpha = options.lambda_alpha.value_or(la);
    out.lambda_gamma = options.lambda_gamma.value_or(lg);
  }
  out.prelim = FitPreliminaryNuisances(d, out.lambda_alpha, out.lambda_gamma, options.solver);
  out.kappa = options.kappa ? *options.kappa
                            : SelectKappa(d, out.prelim, options.kappa_grid, options.cv_folds,
                                          options.seed, options.solver);
  // A selected constant whose calibration diverges moves up the grid.
  const std::vector<double> escalation = EscalationGrid(options, out.kappa);
  out.beta = WithEscalation(escalation, &out.kappa, [&](double k) {
    return EstimateBeta(d, out.prelim, k, options.solver, options.threads);
  });
  out.n_min = options.n_min > 0 ? options.n_min : DefaultNMin(d.n(), d.p());
  if (options.fit_roc) {
    out.roc_kappa = out.kappa;
    out.roc = WithEscalation(escalation, &out.roc_kappa, [&](double k) {
      return EstimateRoc(d, out.beta.beta, out.prelim, out.n_min, k, options.solver,
                         options.threads, options.max_points);
    });
  }
  out.stats = CollectFitStats(out);
  return out;
}

FitStats CollectFitStats(const PipelineResult& result) {
  FitStats stats;
  Absorb(result.prelim.alpha, &stats);
  Absorb(result.prelim.gamma, &stats);
  for (const CoordinateCalibration& cal : result.beta.per_coordinate) {
    Absorb(cal.alpha_pos, &stats);
    Absorb(cal.alpha_neg, &stats);
    Absorb(cal.gamma_pos, &stats);
    Absorb(cal.gamma_neg, &stats);
  }
  if (result.roc) {
    for (const RocCalibration& cal : result.roc->per_cutoff) {
      Absorb(cal.alpha, &stats);
      Absorb(cal.gamma, &stats);
    }
  }
  return stats;
}

Vector SolveWeightedLogistic(const Eigen::Ref<const RowMatrix>& a, const Vector& weights,
                             const Vector& targets) {
  const Eigen::Index q = a.cols();
  const double total = weights.sum();
  if (!(total > 0.0)) throw ValidationError("weighted logistic equation has no weight");
  auto residual = [&](const Vector& beta) {
    const Vector eta = a * beta;
    Vector f(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      f[i] = weights[i] * (targets[i] - Logistic(eta[i]));
    }
    return Vector((a.transpose() * f) / total);
  };
  Vector beta = Vector::Zero(q);
  Vector res = residual(beta);
  double norm = res.cwiseAbs().maxCoeff();
  for (int iter = 0; norm > 1e-10; ++iter) {
    if (iter >= 200) throw EstimationError("weighted logistic equation did not converge");
    const Vector eta = a * beta;
    Matrix hess = Matrix::Zero(q, q);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const auto row = a.row(i);
      hess.noalias() += (weights[i] * LogisticDeriv(eta[i]) / total) * row.transpose() * row;
    }
    const Vector step = hess.ldlt().solve(res);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= 50; ++h, t *= 0.5) {
      Vector cand = (beta + t * step).cwiseMax(-20.0).cwiseMin(20.0);
      Vector cand_res = residual(cand);
      const double cand_norm = cand_res.cwiseAbs().maxCoeff();
      if (cand_norm < norm) {
        beta = std::move(cand);
        res = std::move(cand_res);
        norm = cand_norm;
        moved = true;
        break;
      }
    }
    if (!moved) throw EstimationError("weighted logistic equation has no root in the box");
  }
  return beta;
}

BaselineResult RunBaselineIw(const Dataset& d, const PreliminaryFits& prelim, int max_points) {
  BaselineResult out;
  const Vector h = DensityRatioValues(d, prelim.alpha.coef);
  const RowMatrix a = d.source_x().leftCols(d.q());
  out.beta = SolveWeightedLogistic(a, h, d.source_y());
  const int rows = d.n() + d.N();
  CurveTerms terms{Vector::Zero(rows), Vector::Zero(rows)};
  for (int i = 0; i < d.n(); ++i) {
    terms.tp[i] = h[i] * d.source_y()[i] / d.n();
    terms.fp[i] = h[i] * (1.0 - d.source_y()[i]) / d.n();
  }
  CurveInputs in;
  in.scores = PooledScores(d, out.beta);
  in.cutoffs = {0.0};
  in.terms = {terms};
  out.curve = EvaluateCurve(in, max_points);
  out.auc = Auc(out.curve);
  return out;
}

BaselineResult RunBaselineIm(const Dataset& d, const PreliminaryFits& prelim, int max_points) {
  BaselineResult out;
  const Vector r = ImputationValues(d, prelim.gamma.coef);
  const Vector r_target = r.tail(d.N());
  const RowMatrix a = d.target_x().leftCols(d.q());
  out.beta = SolveWeightedLogistic(a, Vector::Ones(d.N()), r_target);
  const int rows = d.n() + d.N();
  CurveTerms terms{Vector::Zero(rows), Vector::Zero(rows)};
  for (int i = d.n(); i < rows; ++i) {
    terms.tp[i] = r[i] / d.N();
    terms.fp[i] = (1.0 - r[i]) / d.N();
  }
  CurveInputs in;
  in.scores = PooledScores(d, out.beta);
  in.cutoffs = {0.0};
  in.terms = {terms};
  out.curve = EvaluateCurve(in, max_points);
  out.auc = Auc(out.curve);
  return out;
}

}  // namespace dramatic
