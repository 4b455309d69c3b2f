#ifndef DRAMATIC_ROC_DR_H_
#define DRAMATIC_ROC_DR_H_

#include <utility>
#include <vector>

#include "dramatic/beta_dr.h"
#include "dramatic/dataset.h"
#include "dramatic/penalized.h"
#include "dramatic/roc_curve.h"

namespace dramatic {

// Scores A_i'beta on every pooled row, source first.
Vector PooledScores(const Dataset& d, const Vector& beta);

// Calibration cutoffs in ascending order: source scores sorted descending,
// m = ceil(n / n_min), ranks n_1 = n and n_j = (m - j + 1) * n_min; the
// cutoff of rank r is the r-th largest score. Equal cutoffs collapse to one.
std::vector<double> QuantileGrid(const Vector& source_scores, int n_min);

// Number of rank segments before duplicate collapsing.
int SegmentCount(int n, int n_min);

// round(sqrt(n) * log(n * p)^(1/3)) clamped to [20, n].
int DefaultNMin(int n, int p);

struct RocCalibration {
  double cutoff = 0.0;
  int effective = 0;  // source rows with score >= cutoff
  NuisanceFit alpha;
  NuisanceFit gamma;
};

// Minimum source rows at or above a calibrated cutoff.
inline constexpr int kMinRocEffective = 20;

// Calibrates both nuisances on rows with score >= c, using weights
// I * gdot(x'gamma~) on the pooled density-ratio problem and I * exp(x'alpha~)
// on the source imputation problem.
RocCalibration CalibrateRocCutoff(const Dataset& d, double c, const Vector& pooled_scores,
                                  const PreliminaryFits& prelim, double lambda_alpha,
                                  double lambda_gamma, const SolverOptions& solver = {});

// kappa * ScoreScale(prob) * sqrt(log(max(n * p, 2)) / m) for a problem with
// m rows.
double RocCalibrationLambda(double kappa, const PenalizedProblem& prob, int n, int p);

// Same as CalibrateRocCutoff with lambdas from RocCalibrationLambda.
RocCalibration CalibrateRocCutoffAuto(const Dataset& d, double c, const Vector& pooled_scores,
                                      const PreliminaryFits& prelim, double kappa,
                                      const SolverOptions& solver = {});

// Raw TP(c) and FP(c) for one nuisance pair.
std::pair<double, double> TpFp(const Dataset& d, double c, const Vector& pooled_scores,
                               const Vector& alpha, const Vector& gamma);

// Per-row TP/FP contributions of one nuisance pair (unit multipliers).
CurveTerms DrTerms(const Dataset& d, const Vector& alpha, const Vector& gamma);

// Clamped (TPR, FPR) at c using the nearest calibrated cutoff for the
// numerators and the lowest cutoff's pair for the denominators.
std::pair<double, double> TprFpr(const Dataset& d, double c, const Vector& pooled_scores,
                                 const std::vector<RocCalibration>& calibrations);

struct RocEstimate {
  std::vector<double> cutoffs;  // ascending, duplicates collapsed
  int n_min = 0;
  int segments = 0;  // m before collapsing
  std::vector<RocCalibration> per_cutoff;
  std::vector<CurveTerms> terms;  // one per cutoff
  RocCurve curve;
  double auc = 0.0;
  double prevalence = 0.0;  // TP(-inf)
};

RocEstimate EstimateRoc(const Dataset& d, const Vector& beta, const PreliminaryFits& prelim,
                        int n_min, double kappa, const SolverOptions& solver = {},
                        unsigned threads = 1, int max_points = 0);

// Re-evaluates a fitted estimate at new scores and row multipliers with the
// nuisances and cutoffs held fixed.
RocCurve ReevaluateCurve(const RocEstimate& est, const Vector& pooled_scores,
                         const Vector* multipliers, int max_points = 0);

}  // namespace dramatic

#endif  // DRAMATIC_ROC_DR_H_
