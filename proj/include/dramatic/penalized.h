#ifndef DRAMATIC_PENALIZED_H_
#define DRAMATIC_PENALIZED_H_

#include <cstdint>
#include <span>
#include <vector>

#include "dramatic/types.h"

namespace dramatic {

enum class LossKind {
  // w_i * (pos_i * exp(eta_i) - neg_i * eta_i), the density-ratio loss.
  kExpLinear,
  // w_i * (-y_i * eta_i + log(1 + exp(eta_i))), the imputation loss.
  kLogistic,
};

const char* LossKindName(LossKind kind);

// An l1-penalized problem over coefficients `offset + delta`, solved for delta:
//
//   minimize  (1/R) sum_i loss_i(x_i' (offset + delta)) + lambda * |delta|_mask
//
// where R is the number of design rows. For the logistic loss `responses`
// holds labels; for the exp-linear loss it holds a signed role: a positive
// value multiplies the exp term and a negative value (by magnitude) the
// linear term. The design is borrowed and must outlive the problem.
struct PenalizedProblem {
  PenalizedProblem(LossKind loss_kind, ConstRowMap design_matrix);

  LossKind loss;
  ConstRowMap design;
  Vector responses;
  Vector sample_weights;
  Vector offset;
  std::vector<char> penalized;  // 1 = penalized, 0 = free
  double lambda = 0.0;

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index dim() const { return design.cols(); }

  // Throws ValidationError when an invariant is violated.
  void Validate() const;
};

// Penalty mask with every coordinate penalized except the intercept (0).
std::vector<char> InterceptFreeMask(Eigen::Index dim);

enum class SolverBackend {
  // Quadratic model of the loss minimized by coordinate descent, with an
  // Armijo line search on the true objective.
  kProximalNewton,
  // Proximal gradient with backtracking.
  kProximalGradient,
};

struct SolverOptions {
  double tol = 1e-7;  // KKT residual target
  int max_iter = 10000;
  SolverBackend backend = SolverBackend::kProximalNewton;
  bool record_trace = false;
};

struct NuisanceFit {
  Vector coef;   // offset + delta
  Vector delta;  // solved increment
  double lambda = 0.0;
  double kkt_residual = 0.0;
  double objective = 0.0;  // penalized objective at delta
  int iterations = 0;
  std::vector<double> objective_trace;  // per iteration when recorded
  double seconds = 0.0;                 // wall time, diagnostics only
};

NuisanceFit SolvePenalized(const PenalizedProblem& prob,
                           const SolverOptions& options = {},
                           const Vector* warm_delta = nullptr);

// Mean weighted loss at `coef` (no penalty).
double SmoothLoss(const PenalizedProblem& prob, const Vector& coef);

// Gradient of SmoothLoss with respect to coef.
Vector LossGradient(const PenalizedProblem& prob, const Vector& coef);

// SmoothLoss(offset + delta) + lambda * |delta|_mask.
double PenalizedObjective(const PenalizedProblem& prob, const Vector& delta);

// Largest subgradient violation at coef: for penalized k with delta_k = 0,
// max(0, |grad_k| - lambda); for penalized k with delta_k != 0,
// |grad_k + sign(delta_k) lambda|; for free k, |grad_k|.
double KktResidual(const PenalizedProblem& prob, const Vector& coef);

// Root mean square over all rows of the weighted loss derivative at the
// offset (zero-weight rows count as zeros).
double ScoreScale(const PenalizedProblem& prob);

// kappa * ScoreScale(prob) * sqrt(log_term / rows). Throws EstimationError
// when no source row (positive role or logistic row) carries weight.
double SelfNormalizedPenalty(double kappa, const PenalizedProblem& prob, double log_term);

// Smallest lambda at which every penalized delta coordinate is zero.
double NullPenaltyLevel(const PenalizedProblem& prob,
                        const SolverOptions& options = {});

// `count` log-spaced values from lo to hi, ascending.
std::vector<double> LogSpacedGrid(double lo, double hi, int count);

// Mean held-out (unpenalized) loss of each grid value under K-fold
// cross-validation. Folds are stratified by label (logistic) or by role
// (exp-linear); a fold split leaving a logistic training or held-out part
// with a single label class is re-drawn once before failing.
std::vector<double> CrossValidatedLosses(const PenalizedProblem& prob_template,
                                         std::span<const double> grid, int folds,
                                         std::uint64_t seed,
                                         const SolverOptions& options = {});

// Grid value with the smallest held-out loss; ties go to the larger lambda.
double CrossValidateLambda(const PenalizedProblem& prob_template,
                           std::span<const double> grid, int folds,
                           std::uint64_t seed, const SolverOptions& options = {});

}  // namespace dramatic

#endif  // DRAMATIC_PENALIZED_H_
