#include "dramatic/roc_dr.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/parallel.h"

namespace dramatic {

Vector PooledScores(const Dataset& d, const Vector& beta) {
  if (beta.size() != d.q()) throw ValidationError("beta must have q entries");
  return d.pooled_a() * beta;
}

int SegmentCount(int n, int n_min) { return (n + n_min - 1) / n_min; }

std::vector<double> QuantileGrid(const Vector& source_scores, int n_min) {
  const int n = static_cast<int>(source_scores.size());
  if (n_min < 1) throw ValidationError("n_min must be positive");
  if (n_min > n) throw ValidationError("n_min exceeds the source sample size");
  std::vector<double> sorted(source_scores.data(), source_scores.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const int m = SegmentCount(n, n_min);
  std::vector<double> cutoffs;
  cutoffs.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    const int rank = j == 1 ? n : (m - j + 1) * n_min;
    cutoffs.push_back(sorted[static_cast<std::size_t>(rank - 1)]);
  }
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  return cutoffs;
}

int DefaultNMin(int n, int p) {
  const double np = static_cast<double>(n) * std::max(p, 1);
  const double raw = std::sqrt(static_cast<double>(n)) * std::cbrt(std::log(std::max(np, 2.0)));
  const int v = static_cast<int>(std::lround(raw));
  return std::clamp(v, std::min(20, n), n);
}

double RocCalibrationLambda(double kappa, const PenalizedProblem& prob, int n, int p) {
  const double np = static_cast<double>(n) * std::max(p, 1);
  return SelfNormalizedPenalty(kappa, prob, std::log(std::max(np, 2.0)));
}

namespace {

struct CutoffWeights {
  Vector alpha;
  Vector gamma;
  int effective = 0;
};

CutoffWeights BuildCutoffWeights(const Dataset& d, double c, const Vector& scores,
                                 const PreliminaryFits& prelim) {
  if (scores.size() != d.n() + d.N()) {
    throw ValidationError("pooled scores must have n + N entries");
  }
  CutoffWeights w;
  const Vector eta_g = d.pooled_x() * prelim.gamma.coef;
  const Vector exp_a = DensityRatioValues(d, prelim.alpha.coef);
  w.alpha = Vector::Zero(scores.size());
  w.gamma = Vector::Zero(d.n());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores[i] < c) continue;
    w.alpha[i] = LogisticDeriv(eta_g[i]);
    if (i < d.n()) {
      w.gamma[i] = exp_a[i];
      ++w.effective;
    }
  }
  if (w.effective < kMinRocEffective) {
    throw EstimationError("cutoff " + std::to_string(c) + " has only " +
                          std::to_string(w.effective) + " source rows at or above it");
  }
  return w;
}

struct CutoffProblems {
  PenalizedProblem alpha;
  PenalizedProblem gamma;
};

CutoffProblems Problems(const Dataset& d, const PreliminaryFits& prelim, const CutoffWeights& w) {
  CutoffProblems p{DensityRatioProblem(d, prelim.alpha.coef),
                   ImputationProblem(d, prelim.gamma.coef)};
  p.alpha.sample_weights = w.alpha;
  p.gamma.sample_weights = w.gamma;
  return p;
}

RocCalibration Solve(double c, const CutoffWeights& w, CutoffProblems p, double lambda_alpha,
                     double lambda_gamma, const SolverOptions& solver) {
  RocCalibration cal;
  cal.cutoff = c;
  cal.effective = w.effective;
  p.alpha.lambda = lambda_alpha;
  p.gamma.lambda = lambda_gamma;
  cal.alpha = SolvePenalized(p.alpha, solver);
  cal.gamma = SolvePenalized(p.gamma, solver);
  return cal;
}

}  // namespace

RocCalibration CalibrateRocCutoff(const Dataset& d, double c, const Vector& pooled_scores,
                                  const PreliminaryFits& prelim, double lambda_alpha,
                                  double lambda_gamma, const SolverOptions& solver) {
  const CutoffWeights w = BuildCutoffWeights(d, c, pooled_scores, prelim);
  return Solve(c, w, Problems(d, prelim, w), lambda_alpha, lambda_gamma, solver);
}

RocCalibration CalibrateRocCutoffAuto(const Dataset& d, double c, const Vector& pooled_scores,
                                      const PreliminaryFits& prelim, double kappa,
                                      const SolverOptions& solver) {
  const CutoffWeights w = BuildCutoffWeights(d, c, pooled_scores, prelim);
  const CutoffProblems p = Problems(d, prelim, w);
  return Solve(c, w, p, RocCalibrationLambda(kappa, p.alpha, d.n(), d.p()),
               RocCalibrationLambda(kappa, p.gamma, d.n(), d.p()), solver);
}

CurveTerms DrTerms(const Dataset& d, const Vector& alpha, const Vector& gamma) {
  const int rows = d.n() + d.N();
  const Vector h = DensityRatioValues(d, alpha);
  const Vector r = ImputationValues(d, gamma);
  CurveTerms t{Vector(rows), Vector(rows)};
  for (int i = 0; i < d.n(); ++i) {
    const double resid = d.source_y()[i] - r[i];
    t.tp[i] = h[i] * resid / d.n();
    t.fp[i] = -h[i] * resid / d.n();
  }
  for (int i = d.n(); i < rows; ++i) {
    t.tp[i] = r[i] / d.N();
    t.fp[i] = (1.0 - r[i]) / d.N();
  }
  return t;
}

std::pair<double, double> TpFp(const Dataset& d, double c, const Vector& pooled_scores,
                               const Vector& alpha, const Vector& gamma) {
  const CurveTerms t = DrTerms(d, alpha, gamma);
  CompensatedSum tp, fp;
  for (Eigen::Index i = 0; i < pooled_scores.size(); ++i) {
    if (pooled_scores[i] < c) continue;
    tp.Add(t.tp[i]);
    fp.Add(t.fp[i]);
  }
  return {tp.Value(), fp.Value()};
}

std::pair<double, double> TprFpr(const Dataset& d, double c, const Vector& pooled_scores,
                                 const std::vector<RocCalibration>& calibrations) {
  if (calibrations.empty()) throw ValidationError("no calibrated cutoffs");
  std::vector<double> cutoffs;
  for (const RocCalibration& cal : calibrations) cutoffs.push_back(cal.cutoff);
  const RocCalibration& low = calibrations.front();
  const auto [tp_all, fp_all] =
      TpFp(d, -std::numeric_limits<double>::infinity(), pooled_scores, low.alpha.coef,
           low.gamma.coef);
  if (!(tp_all > 1e-6) || !(fp_all > 1e-6)) {
    throw EstimationError("degenerate prevalence");
  }
  const RocCalibration& near =
      calibrations[static_cast<std::size_t>(NearestCutoff(cutoffs, c))];
  const auto [tp, fp] = TpFp(d, c, pooled_scores, near.alpha.coef, near.gamma.coef);
  return {std::clamp(tp / tp_all, 0.0, 1.0), std::clamp(fp / fp_all, 0.0, 1.0)};
}

RocEstimate EstimateRoc(const Dataset& d, const Vector& beta, const PreliminaryFits& prelim,
                        int n_min, double kappa, const SolverOptions& solver,
                        unsigned threads, int max_points) {
  if (n_min < std::min(20, d.n())) throw ValidationError("n_min must be at least 20");
  RocEstimate est;
  est.n_min = n_min;
  est.segments = SegmentCount(d.n(), n_min);
  const Vector scores = PooledScores(d, beta);
  est.cutoffs = QuantileGrid(scores.head(d.n()), n_min);
  const std::size_t m = est.cutoffs.size();
  est.per_cutoff.resize(m);
  est.terms.resize(m);
  ParallelFor(m, threads, [&](std::size_t k) {
    est.per_cutoff[k] = CalibrateRocCutoffAuto(d, est.cutoffs[k], scores, prelim, kappa, solver);
    est.terms[k] = DrTerms(d, est.per_cutoff[k].alpha.coef, est.per_cutoff[k].gamma.coef);
  });
  est.curve = ReevaluateCurve(est, scores, nullptr, max_points);
  est.auc = Auc(est.curve);
  est.prevalence = est.curve.tp_total;
  return est;
}

RocCurve ReevaluateCurve(const RocEstimate& est, const Vector& pooled_scores,
                         const Vector* multipliers, int max_points) {
  CurveInputs in;
  in.scores = pooled_scores;
  in.cutoffs = est.cutoffs;
  in.terms = est.terms;
  in.multipliers = multipliers;
  return EvaluateCurve(in, max_points);
}

}  // namespace dramatic
