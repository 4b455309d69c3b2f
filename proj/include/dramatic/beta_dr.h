#ifndef DRAMATIC_BETA_DR_H_
#define DRAMATIC_BETA_DR_H_

#include <cstdint>
#include <vector>

#include "dramatic/dataset.h"
#include "dramatic/penalized.h"
#include "dramatic/types.h"

namespace dramatic {

// Pooled density-ratio problem over all n + N rows: role rho_n on source rows
// and -rho_N on target rows, unit weights, the given offset, lambda = 0.
PenalizedProblem DensityRatioProblem(const Dataset& d, const Vector& offset);

// Source-only logistic imputation problem with unit weights, lambda = 0.
PenalizedProblem ImputationProblem(const Dataset& d, const Vector& offset);

struct PreliminaryFits {
  NuisanceFit alpha;  // density ratio exp(x'alpha)
  NuisanceFit gamma;  // imputation g(x'gamma)
};

PreliminaryFits FitPreliminaryNuisances(const Dataset& d, double lambda_alpha,
                                        double lambda_gamma,
                                        const SolverOptions& solver = {});

// exp(x'alpha) on source rows.
Vector DensityRatioValues(const Dataset& d, const Vector& alpha);
// g(x'gamma) on every pooled row, source first.
Vector ImputationValues(const Dataset& d, const Vector& gamma);

struct EquationOptions {
  double tol = 1e-9;       // residual sup-norm
  double box = 20.0;       // coordinate bound on beta
  int max_iter = 200;
  int max_halvings = 50;
};

// Residual of
//   (1/n) sum_S xi_i h_i A_i (Y_i - r_i) + (1/N) sum_T xi_i A_i (r_i - g(A_i'beta)).
// `h_source` has n entries, `r_pooled` n + N; `multipliers` (pooled, may be
// null) defaults to all ones.
Vector EstimatingEquationResidual(const Dataset& d, const Vector& h_source,
                                  const Vector& r_pooled, const Vector& beta,
                                  const Vector* multipliers = nullptr);

// Root of the estimating equation by damped Newton with Jacobian
// -InformationMatrix. Throws EstimationError on a singular Jacobian or when no
// root is found inside the box.
Vector SolveEstimatingEquation(const Dataset& d, const Vector& h_source,
                               const Vector& r_pooled,
                               const Vector* multipliers = nullptr,
                               const Vector* start = nullptr,
                               const EquationOptions& options = {});

// (1/N) sum_T xi_i gdot(A_i'beta) A_i A_i'. Throws EstimationError when the
// smallest eigenvalue is below 1e-10.
Matrix InformationMatrix(const Dataset& d, const Vector& beta,
                         const Vector* multipliers = nullptr);

// w_ji = e_j' Sigma^{-1} A_i for every pooled row.
Vector CoordinateWeights(const Dataset& d, const Matrix& info, int j);

struct SignLambdas {
  double alpha_pos = 0.0;
  double alpha_neg = 0.0;
  double gamma_pos = 0.0;
  double gamma_neg = 0.0;
};

struct CoordinateCalibration {
  int j = 0;             // 0-based coordinate
  Vector w;              // pooled w_ji
  NuisanceFit alpha_pos;
  NuisanceFit alpha_neg;
  NuisanceFit gamma_pos;
  NuisanceFit gamma_neg;
  bool fallback = false;  // unsplit calibration used; pos and neg fits coincide
  int source_pos = 0;     // source rows with w > 0
  int source_neg = 0;
  Vector h_source;        // sign-matched density ratio plug-in
  Vector r_pooled;        // sign-matched imputation plug-in
  Vector solution;        // full root with these plug-ins, when solved
};

// Minimum per-partition row count of a sign group before the split is
// considered degenerate.
inline constexpr int kMinSignGroup = 10;

// The four sign-split calibrations for coordinate j with explicit penalty
// levels. Throws DegenerateSplitError when either group has fewer than
// kMinSignGroup source or target rows.
CoordinateCalibration CalibrateBetaCoordinate(const Dataset& d, int j,
                                              const PreliminaryFits& prelim,
                                              const Vector& beta_tilde,
                                              const SignLambdas& lambdas,
                                              const SolverOptions& solver = {});

// Penalty level for a calibration problem with m rows:
// kappa * ScoreScale(prob) * sqrt(log(max(p, 2)) / m). Throws
// EstimationError when no source row carries weight.
double CalibrationLambda(double kappa, const PenalizedProblem& prob, int p);

// Calibrates coordinate j with lambdas from CalibrationLambda; falls back to
// a single calibration weighted by |w_ji| over all rows when the sign split is
// degenerate.
CoordinateCalibration CalibrateBetaCoordinateAuto(const Dataset& d, int j,
                                                  const PreliminaryFits& prelim,
                                                  const Vector& beta_tilde, double kappa,
                                                  const SolverOptions& solver = {});

struct BetaEstimate {
  Vector beta;
  Vector preliminary_beta;
  Matrix info_matrix;  // at preliminary_beta
  std::vector<CoordinateCalibration> per_coordinate;
};

// Solves the estimating equation once per coordinate with its sign-matched
// plug-ins and keeps coordinate j of each solution. Newton starts from
// `start` when given, else from each calibration's stored solution.
Vector DrBeta(const Dataset& d, const std::vector<CoordinateCalibration>& calibrations,
              const Vector* multipliers = nullptr, const Vector* start = nullptr);

// Preliminary beta, per-coordinate calibration and final beta.
BetaEstimate EstimateBeta(const Dataset& d, const PreliminaryFits& prelim, double kappa,
                          const SolverOptions& solver = {}, unsigned threads = 1);

}  // namespace dramatic

#endif  // DRAMATIC_BETA_DR_H_
