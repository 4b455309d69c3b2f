#ifndef DRAMATIC_ROC_CURVE_H_
#define DRAMATIC_ROC_CURVE_H_

#include <vector>

#include "dramatic/types.h"

namespace dramatic {

// Per-row additive contributions to TP(c) and FP(c) for one nuisance set:
// TP(c) = sum_i I(score_i >= c) * tp[i], and likewise for FP.
struct CurveTerms {
  Vector tp;
  Vector fp;
};

// Inputs of a weighted-sum ROC estimate. `terms[k]` is used for cutoffs c
// whose nearest calibrated cutoff is cutoffs[k]; the denominators at
// c = -inf use terms[0]. Cutoffs are ascending.
struct CurveInputs {
  Vector scores;
  std::vector<double> cutoffs;
  std::vector<CurveTerms> terms;
  const Vector* multipliers = nullptr;  // per-row factor applied to every term
};

// Points of an estimated curve ordered by ascending cutoff, from -inf to +inf.
struct RocCurve {
  std::vector<double> c;
  std::vector<double> fpr_raw;
  std::vector<double> tpr_raw;
  std::vector<double> fpr;  // clamped to [0,1], non-increasing in c
  std::vector<double> tpr;
  double tp_total = 0.0;  // TP(-inf)
  double fp_total = 0.0;  // FP(-inf)
};

// Index of the cutoff nearest to c in an ascending list; midpoint ties go to
// the lower cutoff.
int NearestCutoff(const std::vector<double>& cutoffs, double c);

// Evaluates the curve on every distinct score plus -inf and +inf, or on an
// evenly spaced subset of `max_points` distinct scores when positive. Throws
// EstimationError "degenerate prevalence" when TP(-inf) or FP(-inf) <= 1e-6.
RocCurve EvaluateCurve(const CurveInputs& in, int max_points = 0);

// Clamps raw ratios to [0,1] and takes the running maximum from the high-c
// end so the result is non-increasing in c.
std::vector<double> MonotoneFromHigh(const std::vector<double>& raw);

// TPR at inf{c : FPR(c) <= u}.
double RocAt(const RocCurve& curve, double u);

// Trapezoid area under the (FPR, TPR) points, augmented with (0,0) and (1,1).
double Auc(const std::vector<double>& fpr, const std::vector<double>& tpr);
double Auc(const RocCurve& curve);

}  // namespace dramatic

#endif  // DRAMATIC_ROC_CURVE_H_
