#include "dramatic/beta_dr.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/parallel.h"

namespace dramatic {

PenalizedProblem DensityRatioProblem(const Dataset& d, const Vector& offset) {
  const PopulationConstants rho = ComputePopulationConstants(d);
  PenalizedProblem prob(LossKind::kExpLinear, d.pooled_x());
  prob.responses.head(d.n()).setConstant(rho.rho_n);
  prob.responses.tail(d.N()).setConstant(-rho.rho_N);
  prob.offset = offset;
  return prob;
}

PenalizedProblem ImputationProblem(const Dataset& d, const Vector& offset) {
  PenalizedProblem prob(LossKind::kLogistic, d.source_x());
  prob.responses = d.source_y();
  prob.offset = offset;
  return prob;
}

PreliminaryFits FitPreliminaryNuisances(const Dataset& d, double lambda_alpha,
                                        double lambda_gamma,
                                        const SolverOptions& solver) {
  if (!(lambda_alpha > 0.0) || !(lambda_gamma > 0.0)) {
    throw ValidationError("preliminary penalty levels must be positive");
  }
  PenalizedProblem alpha = DensityRatioProblem(d, Vector::Zero(d.dim()));
  alpha.lambda = lambda_alpha;
  PenalizedProblem gamma = ImputationProblem(d, Vector::Zero(d.dim()));
  gamma.lambda = lambda_gamma;
  return {SolvePenalized(alpha, solver), SolvePenalized(gamma, solver)};
}

Vector DensityRatioValues(const Dataset& d, const Vector& alpha) {
  return (d.source_x() * alpha).array().exp();
}

Vector ImputationValues(const Dataset& d, const Vector& gamma) {
  const Vector eta = d.pooled_x() * gamma;
  return eta.unaryExpr([](double v) { return Logistic(v); });
}

namespace {

void CheckPlugins(const Dataset& d, const Vector& h_source, const Vector& r_pooled,
                  const Vector* multipliers) {
  if (h_source.size() != d.n()) throw ValidationError("h values must have n entries");
  if (r_pooled.size() != d.n() + d.N()) {
    throw ValidationError("r values must have n + N entries");
  }
  if (!h_source.allFinite() || (h_source.array() <= 0.0).any()) {
    throw ValidationError("h values must be finite and positive");
  }
  if (!r_pooled.allFinite() || (r_pooled.array() < 0.0).any() ||
      (r_pooled.array() > 1.0).any()) {
    throw ValidationError("r values must lie in [0,1]");
  }
  if (multipliers && multipliers->size() != d.n() + d.N()) {
    throw ValidationError("multipliers must have n + N entries");
  }
}

// Source part of the residual; does not depend on beta.
Vector SourceTerm(const Dataset& d, const Vector& h_source, const Vector& r_pooled,
                  const Vector* xi) {
  const int q = d.q();
  const ConstRowMap x = d.source_x();
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(q));
  for (int i = 0; i < d.n(); ++i) {
    const double m = xi ? (*xi)[i] : 1.0;
    const double f = m * h_source[i] * (d.source_y()[i] - r_pooled[i]);
    for (int k = 0; k < q; ++k) acc[static_cast<std::size_t>(k)].Add(f * x(i, k));
  }
  Vector out(q);
  for (int k = 0; k < q; ++k) out[k] = acc[static_cast<std::size_t>(k)].Value() / d.n();
  return out;
}

Vector TargetTerm(const Dataset& d, const Vector& r_pooled, const Vector& beta,
                  const Vector* xi) {
  const int q = d.q();
  const ConstRowMap x = d.target_x();
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(q));
  for (int i = 0; i < d.N(); ++i) {
    const int row = d.n() + i;
    const double m = xi ? (*xi)[row] : 1.0;
    const double eta = x.row(i).head(q).dot(beta);
    const double f = m * (r_pooled[row] - Logistic(eta));
    for (int k = 0; k < q; ++k) acc[static_cast<std::size_t>(k)].Add(f * x(i, k));
  }
  Vector out(q);
  for (int k = 0; k < q; ++k) out[k] = acc[static_cast<std::size_t>(k)].Value() / d.N();
  return out;
}

double SupNorm(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

Vector ClampBox(Vector v, double box) { return v.cwiseMax(-box).cwiseMin(box); }

}  // namespace

Vector EstimatingEquationResidual(const Dataset& d, const Vector& h_source,
                                  const Vector& r_pooled, const Vector& beta,
                                  const Vector* multipliers) {
  CheckPlugins(d, h_source, r_pooled, multipliers);
  if (beta.size() != d.q()) throw ValidationError("beta must have q entries");
  return SourceTerm(d, h_source, r_pooled, multipliers) +
         TargetTerm(d, r_pooled, beta, multipliers);
}

Matrix InformationMatrix(const Dataset& d, const Vector& beta, const Vector* multipliers) {
  const int q = d.q();
  if (beta.size() != q) throw ValidationError("beta must have q entries");
  const ConstRowMap x = d.target_x();
  Matrix info = Matrix::Zero(q, q);
  for (int i = 0; i < d.N(); ++i) {
    const double m = multipliers ? (*multipliers)[d.n() + i] : 1.0;
    const auto a = x.row(i).head(q);
    const double w = m * LogisticDeriv(a.dot(beta));
    info.noalias() += w * a.transpose() * a;
  }
  info /= d.N();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(info, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() >= 1e-10)) {
    throw EstimationError("information matrix is not positive definite (min eigenvalue " +
                          std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  return info;
}

Vector SolveEstimatingEquation(const Dataset& d, const Vector& h_source,
                               const Vector& r_pooled, const Vector* multipliers,
                               const Vector* start, const EquationOptions& options) {
  CheckPlugins(d, h_source, r_pooled, multipliers);
  const Vector source = SourceTerm(d, h_source, r_pooled, multipliers);
  Vector beta = start ? ClampBox(*start, options.box) : Vector::Zero(d.q());
  if (beta.size() != d.q()) throw ValidationError("start must have q entries");
  Vector res = source + TargetTerm(d, r_pooled, beta, multipliers);
  double norm = SupNorm(res);
  for (int iter = 0; norm > options.tol; ++iter) {
    if (iter >= options.max_iter) {
      throw EstimationError("estimating equation did not converge (residual " +
                            std::to_string(norm) + ")");
    }
    Matrix jac;
    try {
      jac = InformationMatrix(d, beta, multipliers);
    } catch (const EstimationError&) {
      throw EstimationError("singular Jacobian in estimating equation");
    }
    const Vector step = jac.ldlt().solve(res);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      Vector cand = ClampBox(beta + t * step, options.box);
      Vector cand_res = source + TargetTerm(d, r_pooled, cand, multipliers);
      const double cand_norm = SupNorm(cand_res);
      if (cand_norm < norm) {
        beta = std::move(cand);
        res = std::move(cand_res);
        norm = cand_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw EstimationError("no root of the estimating equation within the box (residual " +
                            std::to_string(norm) + ")");
    }
  }
  return beta;
}

Vector CoordinateWeights(const Dataset& d, const Matrix& info, int j) {
  if (j < 0 || j >= d.q()) throw ValidationError("coordinate index out of range");
  const Vector v = info.ldlt().solve(Vector::Unit(d.q(), j));
  return d.pooled_x().leftCols(d.q()) * v;
}

double CalibrationLambda(double kappa, const PenalizedProblem& prob, int p) {
  return SelfNormalizedPenalty(kappa, prob, std::log(std::max(p, 2)));
}

namespace {

struct GroupWeights {
  Vector alpha;  // pooled rows
  Vector gamma;  // source rows
  int source = 0;
  int target = 0;
};

// selector: +1 for w > 0, -1 for w <= 0, 0 for every row.
GroupWeights BuildGroup(const Dataset& d, const Vector& w, const Vector& gdot_gamma,
                        const Vector& exp_alpha, int selector) {
  GroupWeights g;
  const int rows = d.n() + d.N();
  g.alpha = Vector::Zero(rows);
  g.gamma = Vector::Zero(d.n());
  for (int i = 0; i < rows; ++i) {
    const bool in = selector == 0 || (selector > 0 ? w[i] > 0.0 : w[i] <= 0.0);
    if (!in) continue;
    g.alpha[i] = std::abs(w[i]) * gdot_gamma[i];
    if (i < d.n()) {
      g.gamma[i] = std::abs(w[i]) * exp_alpha[i];
      ++g.source;
    } else {
      ++g.target;
    }
  }
  return g;
}

PenalizedProblem AlphaProblem(const Dataset& d, const PreliminaryFits& prelim,
                              const Vector& weights) {
  PenalizedProblem prob = DensityRatioProblem(d, prelim.alpha.coef);
  prob.sample_weights = weights;
  return prob;
}

PenalizedProblem GammaProblem(const Dataset& d, const PreliminaryFits& prelim,
                              const Vector& weights) {
  PenalizedProblem prob = ImputationProblem(d, prelim.gamma.coef);
  prob.sample_weights = weights;
  return prob;
}

NuisanceFit SolveAt(PenalizedProblem prob, double lambda, const SolverOptions& solver) {
  prob.lambda = lambda;
  return SolvePenalized(prob, solver);
}

NuisanceFit SolveAlpha(const Dataset& d, const PreliminaryFits& prelim, const Vector& weights,
                       double lambda, const SolverOptions& solver) {
  return SolveAt(AlphaProblem(d, prelim, weights), lambda, solver);
}

NuisanceFit SolveGamma(const Dataset& d, const PreliminaryFits& prelim, const Vector& weights,
                       double lambda, const SolverOptions& solver) {
  return SolveAt(GammaProblem(d, prelim, weights), lambda, solver);
}

void BuildPlugins(const Dataset& d, CoordinateCalibration* cal) {
  const Vector eta_a_pos = d.source_x() * cal->alpha_pos.coef;
  const Vector eta_a_neg = d.source_x() * cal->alpha_neg.coef;
  const Vector eta_g_pos = d.pooled_x() * cal->gamma_pos.coef;
  const Vector eta_g_neg = d.pooled_x() * cal->gamma_neg.coef;
  cal->h_source.resize(d.n());
  cal->r_pooled.resize(d.n() + d.N());
  for (int i = 0; i < d.n() + d.N(); ++i) {
    const bool pos = cal->w[i] > 0.0;
    cal->r_pooled[i] = Logistic(pos ? eta_g_pos[i] : eta_g_neg[i]);
    if (i < d.n()) cal->h_source[i] = std::exp(pos ? eta_a_pos[i] : eta_a_neg[i]);
  }
}

struct Prepared {
  Vector w;
  Vector gdot_gamma;
  Vector exp_alpha;
};

Prepared Prepare(const Dataset& d, int j, const PreliminaryFits& prelim,
                 const Vector& beta_tilde) {
  Prepared p;
  p.w = CoordinateWeights(d, InformationMatrix(d, beta_tilde), j);
  const Vector eta_g = d.pooled_x() * prelim.gamma.coef;
  p.gdot_gamma = eta_g.unaryExpr([](double v) { return LogisticDeriv(v); });
  p.exp_alpha = DensityRatioValues(d, prelim.alpha.coef);
  return p;
}

}  // namespace

CoordinateCalibration CalibrateBetaCoordinate(const Dataset& d, int j,
                                              const PreliminaryFits& prelim,
                                              const Vector& beta_tilde,
                                              const SignLambdas& lambdas,
                                              const SolverOptions& solver) {
  const Prepared prep = Prepare(d, j, prelim, beta_tilde);
  const GroupWeights pos = BuildGroup(d, prep.w, prep.gdot_gamma, prep.exp_alpha, +1);
  const GroupWeights neg = BuildGroup(d, prep.w, prep.gdot_gamma, prep.exp_alpha, -1);
  if (std::min({pos.source, pos.target, neg.source, neg.target}) < kMinSignGroup) {
    throw DegenerateSplitError("degenerate sign split for coordinate " +
                               std::to_string(j + 1));
  }
  CoordinateCalibration cal;
  cal.j = j;
  cal.w = prep.w;
  cal.source_pos = pos.source;
  cal.source_neg = neg.source;
  cal.alpha_pos = SolveAlpha(d, prelim, pos.alpha, lambdas.alpha_pos, solver);
  cal.alpha_neg = SolveAlpha(d, prelim, neg.alpha, lambdas.alpha_neg, solver);
  cal.gamma_pos = SolveGamma(d, prelim, pos.gamma, lambdas.gamma_pos, solver);
  cal.gamma_neg = SolveGamma(d, prelim, neg.gamma, lambdas.gamma_neg, solver);
  BuildPlugins(d, &cal);
  return cal;
}

CoordinateCalibration CalibrateBetaCoordinateAuto(const Dataset& d, int j,
                                                  const PreliminaryFits& prelim,
                                                  const Vector& beta_tilde, double kappa,
                                                  const SolverOptions& solver) {
  const Prepared prep = Prepare(d, j, prelim, beta_tilde);
  const GroupWeights pos = BuildGroup(d, prep.w, prep.gdot_gamma, prep.exp_alpha, +1);
  const GroupWeights neg = BuildGroup(d, prep.w, prep.gdot_gamma, prep.exp_alpha, -1);
  if (std::min({pos.source, pos.target, neg.source, neg.target}) >= kMinSignGroup) {
    SignLambdas lambdas;
    lambdas.alpha_pos = CalibrationLambda(kappa, AlphaProblem(d, prelim, pos.alpha), d.p());
    lambdas.alpha_neg = CalibrationLambda(kappa, AlphaProblem(d, prelim, neg.alpha), d.p());
    lambdas.gamma_pos = CalibrationLambda(kappa, GammaProblem(d, prelim, pos.gamma), d.p());
    lambdas.gamma_neg = CalibrationLambda(kappa, GammaProblem(d, prelim, neg.gamma), d.p());
    return CalibrateBetaCoordinate(d, j, prelim, beta_tilde, lambdas, solver);
  }
  const GroupWeights all = BuildGroup(d, prep.w, prep.gdot_gamma, prep.exp_alpha, 0);
  CoordinateCalibration cal;
  cal.j = j;
  cal.w = prep.w;
  cal.fallback = true;
  cal.source_pos = pos.source;
  cal.source_neg = neg.source;
  const PenalizedProblem alpha = AlphaProblem(d, prelim, all.alpha);
  const PenalizedProblem gamma = GammaProblem(d, prelim, all.gamma);
  cal.alpha_pos = SolveAt(alpha, CalibrationLambda(kappa, alpha, d.p()), solver);
  cal.gamma_pos = SolveAt(gamma, CalibrationLambda(kappa, gamma, d.p()), solver);
  cal.alpha_neg = cal.alpha_pos;
  cal.gamma_neg = cal.gamma_pos;
  BuildPlugins(d, &cal);
  return cal;
}

Vector DrBeta(const Dataset& d, const std::vector<CoordinateCalibration>& calibrations,
              const Vector* multipliers, const Vector* start) {
  if (static_cast<int>(calibrations.size()) != d.q()) {
    throw ValidationError("need one calibration per risk-factor coordinate");
  }
  Vector beta(d.q());
  for (const CoordinateCalibration& cal : calibrations) {
    const Vector* from = start ? start : (cal.solution.size() ? &cal.solution : nullptr);
    const Vector sol =
        SolveEstimatingEquation(d, cal.h_source, cal.r_pooled, multipliers, from);
    beta[cal.j] = sol[cal.j];
  }
  return beta;
}

BetaEstimate EstimateBeta(const Dataset& d, const PreliminaryFits& prelim, double kappa,
                          const SolverOptions& solver, unsigned threads) {
  BetaEstimate est;
  est.preliminary_beta =
      SolveEstimatingEquation(d, DensityRatioValues(d, prelim.alpha.coef),
                              ImputationValues(d, prelim.gamma.coef));
  est.info_matrix = InformationMatrix(d, est.preliminary_beta);
  est.per_coordinate.resize(static_cast<std::size_t>(d.q()));
  ParallelFor(static_cast<std::size_t>(d.q()), threads, [&](std::size_t j) {
    est.per_coordinate[j] = CalibrateBetaCoordinateAuto(d, static_cast<int>(j), prelim,
                                                        est.preliminary_beta, kappa, solver);
  });
  est.beta.resize(d.q());
  for (CoordinateCalibration& cal : est.per_coordinate) {
    cal.solution = SolveEstimatingEquation(d, cal.h_source, cal.r_pooled, nullptr,
                                           &est.preliminary_beta);
    est.beta[cal.j] = cal.solution[cal.j];
  }
  return est;
}

}  // namespace dramatic
