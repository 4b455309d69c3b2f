#ifndef DRAMATIC_PIPELINE_H_
#define DRAMATIC_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dramatic/beta_dr.h"
#include "dramatic/roc_dr.h"

namespace dramatic {

struct PipelineOptions {
  int cv_folds = 5;
  int lambda_grid_size = 20;
  std::optional<double> lambda_alpha;  // overrides cross-validation
  std::optional<double> lambda_gamma;
  std::optional<double> kappa;
  std::vector<double> kappa_grid = {0.25, 0.5, 1.0, 2.0};
  int n_min = 0;  // 0 selects DefaultNMin
  bool fit_roc = true;
  int max_points = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  SolverOptions solver;
};

// Summary over every reported penalized fit (preliminary, beta calibration,
// ROC calibration).
struct FitStats {
  int fits = 0;
  double max_kkt = 0.0;
  double max_seconds = 0.0;
};

struct PipelineResult {
  double lambda_alpha = 0.0;
  double lambda_gamma = 0.0;
  double kappa = 0.0;      // used by the beta calibration
  double roc_kappa = 0.0;  // used by the ROC calibration
  int n_min = 0;
  PreliminaryFits prelim;
  BetaEstimate beta;
  std::optional<RocEstimate> roc;
  FitStats stats;
};

// 20 log-spaced values over [0.01, 0.5] * sqrt(log(max(p, 2)) / n).
std::vector<double> PreliminaryLambdaGrid(const Dataset& d, int count = 20);

// Cross-validated (lambda_alpha, lambda_gamma) for the preliminary fits.
std::pair<double, double> SelectPreliminaryLambdas(const Dataset& d, int folds, int grid_size,
                                                   std::uint64_t seed,
                                                   const SolverOptions& solver = {});

// Calibration constant minimizing the summed held-out loss of the two
// all-rows calibration problems (weights gdot(x'gamma~) and exp(x'alpha~));
// ties go to the larger constant.
double SelectKappa(const Dataset& d, const PreliminaryFits& prelim,
                   const std::vector<double>& grid, int folds, std::uint64_t seed,
                   const SolverOptions& solver = {});

// Throws EstimationError "degenerate labels" unless both classes occur in
// the source labels.
void CheckLabels(const Dataset& d);

PipelineResult RunDramatic(const Dataset& d, const PipelineOptions& options);

FitStats CollectFitStats(const PipelineResult& result);

// Root of sum_i w_i A_i (t_i - g(A_i'beta)) = 0 over the given rows by damped
// Newton (importance-weighted or imputed logistic equation).
Vector SolveWeightedLogistic(const Eigen::Ref<const RowMatrix>& a, const Vector& weights,
                             const Vector& targets);

struct BaselineResult {
  Vector beta;
  RocCurve curve;
  double auc = 0.0;
};

// Importance weighting: source equation weighted by exp(x'alpha~); TP/FP
// from source weighted sums.
BaselineResult RunBaselineIw(const Dataset& d, const PreliminaryFits& prelim,
                             int max_points = 0);

// Imputation: target equation with outcomes g(x'gamma~); TP/FP from target
// imputed sums.
BaselineResult RunBaselineIm(const Dataset& d, const PreliminaryFits& prelim,
                             int max_points = 0);

}  // namespace dramatic

#endif  // DRAMATIC_PIPELINE_H_
