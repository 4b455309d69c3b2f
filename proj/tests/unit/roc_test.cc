#include <doctest.h>

#include <cmath>
#include <limits>

#include "dramatic/beta_dr.h"
#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/roc_curve.h"
#include "dramatic/roc_dr.h"
#include "dramatic/rng.h"
#include "fixtures.h"
#include "oracles.h"

using namespace dramatic;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector Iota(int n, double start) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = start + i;
  return v;
}

// Labeled scores whose curve terms reproduce the empirical ROC: every row
// contributes y / n_pos to TP and (1 - y) / n_neg to FP.
CurveInputs EmpiricalInputs(const std::vector<double>& score, const std::vector<double>& label) {
  const int n = static_cast<int>(score.size());
  double pos = 0;
  for (double y : label) pos += y;
  CurveInputs in;
  in.scores = Eigen::Map<const Vector>(score.data(), n);
  in.cutoffs = {0.0};
  CurveTerms t{Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    t.tp[i] = label[i] / pos;
    t.fp[i] = (1 - label[i]) / (n - pos);
  }
  in.terms = {t};
  return in;
}

}  // namespace

TEST_CASE("quantile grid ranks for n = 600, n_min = 120") {
  // scores 1..600: the r-th largest is 601 - r
  const std::vector<double> c = QuantileGrid(Iota(600, 1.0), 120);
  CHECK(SegmentCount(600, 120) == 5);
  CHECK(c == std::vector<double>{1, 121, 241, 361, 481});
}

TEST_CASE("quantile grid with n_min = n is the minimum score") {
  CounterRng rng(2);
  Vector s(100);
  for (int i = 0; i < 100; ++i) s[i] = rng.Normal();
  CHECK(QuantileGrid(s, 100) == std::vector<double>{s.minCoeff()});
}

TEST_CASE("quantile grid on ten distinct scores with n_min = 5") {
  Vector s = Iota(10, 1.0).reverse();
  CHECK(QuantileGrid(s, 5) == std::vector<double>{1, 6});
  CHECK(SegmentCount(10, 5) == 2);
  CHECK(SegmentCount(11, 5) == 3);
}

TEST_CASE("tied scores collapse duplicate cutoffs") {
  Vector s = Vector::Constant(60, 2.0);
  s.head(10).setConstant(5.0);
  CHECK(QuantileGrid(s, 20) == std::vector<double>{2.0});
  CHECK_THROWS_AS(QuantileGrid(s, 61), ValidationError);
}

TEST_CASE("default segment size") {
  // sqrt(600) * cbrt(log(60000)) = 24.4949 * 2.22385 = 54.47
  CHECK(DefaultNMin(600, 100) == 54);
  CHECK(DefaultNMin(30, 10) == 20);
  CHECK(DefaultNMin(10, 10) == 10);
  CHECK(DefaultNMin(100000, 100) == 799);
}

TEST_CASE("nearest cutoff breaks midpoint ties toward the lower cutoff") {
  const std::vector<double> c = {1.0, 3.0, 7.0};
  CHECK(NearestCutoff(c, -5.0) == 0);
  CHECK(NearestCutoff(c, 2.0) == 0);
  CHECK(NearestCutoff(c, 2.01) == 1);
  CHECK(NearestCutoff(c, 5.0) == 1);
  CHECK(NearestCutoff(c, 6.0) == 2);
  CHECK(NearestCutoff(c, 99.0) == 2);
  CHECK(NearestCutoff({4.0}, -kInf) == 0);
}

TEST_CASE("nearest cutoff stays within the largest adjacent gap") {
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> c(1 + rng.Below(8));
    for (double& v : c) v = rng.Normal();
    std::sort(c.begin(), c.end());
    double gap = 0.0;
    for (std::size_t k = 1; k < c.size(); ++k) gap = std::max(gap, c[k] - c[k - 1]);
    const double x = c.front() + (c.back() - c.front()) * rng.Uniform();
    CHECK(std::abs(c[NearestCutoff(c, x)] - x) <= gap);
  }
}

TEST_CASE("monotone post-processing clamps and runs the maximum from high cutoffs") {
  const std::vector<double> raw = {1.2, 0.7, 0.8, -0.1, 0.3, 0.0};
  CHECK(MonotoneFromHigh(raw) == std::vector<double>{1.0, 0.8, 0.8, 0.3, 0.3, 0.0});
}

TEST_CASE("trapezoid area") {
  CHECK(Auc({0.5}, {0.5}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(Auc({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  // (0,0) (0.2,0.6) (1,1): 0.2*0.3 + 0.8*0.8
  CHECK(Auc({0.2}, {0.6}) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(Auc({0.1, 0.2}, {0.3}), ValidationError);
}

TEST_CASE("single-set curve reproduces the empirical ROC and Mann-Whitney AUC") {
  CounterRng rng(8);
  std::vector<double> score(300), label(300);
  for (int i = 0; i < 300; ++i) {
    label[i] = rng.Bernoulli(0.4);
    score[i] = std::round((rng.Normal() + label[i]) * 20.0) / 20.0;  // with ties
  }
  const RocCurve curve = EvaluateCurve(EmpiricalInputs(score, label));
  CHECK(curve.c.front() == -kInf);
  CHECK(curve.c.back() == kInf);
  for (std::size_t k = 0; k < curve.c.size(); ++k) {
    const auto [tpr, fpr] = oracle::EmpiricalRates(score, label, curve.c[k]);
    CHECK(curve.tpr[k] == doctest::Approx(tpr).epsilon(1e-12));
    CHECK(curve.fpr[k] == doctest::Approx(fpr).epsilon(1e-12));
  }
  CHECK(Auc(curve) == doctest::Approx(oracle::MannWhitneyAuc(score, label)).epsilon(1e-12));
  CHECK(RocAt(curve, 1.0) == 1.0);
}

TEST_CASE("perfectly separated scores give unit area") {
  std::vector<double> score, label;
  for (int i = 0; i < 50; ++i) {
    score.push_back(i);
    label.push_back(i >= 30);
  }
  CHECK(Auc(EvaluateCurve(EmpiricalInputs(score, label))) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ROC(u) uses the smallest cutoff with FPR <= u") {
  RocCurve curve;
  curve.c = {-kInf, 1, 2, 3, kInf};
  curve.fpr = {1.0, 0.5, 0.2, 0.1, 0.0};
  curve.tpr = {1.0, 0.9, 0.6, 0.3, 0.0};
  CHECK(RocAt(curve, 0.0) == 0.0);
  CHECK(RocAt(curve, 0.1) == 0.3);
  CHECK(RocAt(curve, 0.15) == 0.3);
  CHECK(RocAt(curve, 0.2) == 0.6);
  CHECK(RocAt(curve, 0.99) == 0.9);
  CHECK(RocAt(curve, 1.0) == 1.0);
}

TEST_CASE("curve evaluation validates its inputs and denominators") {
  CurveInputs in = EmpiricalInputs({1, 2, 3}, {0, 1, 0});
  in.cutoffs = {2.0, 1.0};
  CHECK_THROWS_AS(EvaluateCurve(in), ValidationError);
  in = EmpiricalInputs({1, 2, 3}, {0, 1, 0});
  in.terms[0].tp.setZero();
  CHECK_THROWS_WITH_AS(EvaluateCurve(in), doctest::Contains("degenerate prevalence"),
                       EstimationError);
}

TEST_CASE("capped evaluation keeps both ends of the score range") {
  std::vector<double> score, label;
  for (int i = 0; i < 500; ++i) {
    score.push_back(i * 0.01);
    label.push_back(i % 3 == 0);
  }
  const RocCurve curve = EvaluateCurve(EmpiricalInputs(score, label), 25);
  CHECK(curve.c.size() == 27);
  CHECK(curve.c[1] == 0.0);
  CHECK(curve.c[25] == doctest::Approx(4.99));
}

TEST_CASE("TP and FP on a hand instance with n = 2, N = 2") {
  // x = (1, a); source a = {0, 1} with y = {1, 0}; target a = {2, -1}
  RowMatrix xs(2, 2), xt(2, 2);
  xs << 1, 0, 1, 1;
  xt << 1, 2, 1, -1;
  Vector y(2);
  y << 1, 0;
  const Dataset d(xs, y, xt, 1);
  Vector alpha(2), gamma(2);
  alpha << 0.0, 0.5;  // h = {1, e^0.5}
  gamma << 0.0, 1.0;  // r = g(a)
  Vector scores(4);
  scores << 0.0, 1.0, 2.0, -1.0;  // pooled scores used with the cutoff
  const double g1 = Logistic(1.0), g2 = Logistic(2.0), gm1 = Logistic(-1.0);
  const double h2 = std::exp(0.5);
  // c = 0.5 keeps source row 2 and target row 1
  const auto [tp, fp] = TpFp(d, 0.5, scores, alpha, gamma);
  CHECK(tp == doctest::Approx(h2 * (0 - g1) / 2 + g2 / 2).epsilon(1e-15));
  CHECK(fp == doctest::Approx(h2 * (g1 - 0) / 2 + (1 - g2) / 2).epsilon(1e-15));
  // c = -inf keeps every row
  const auto [tp0, fp0] = TpFp(d, -kInf, scores, alpha, gamma);
  CHECK(tp0 == doctest::Approx((1 - 0.5) / 2 + h2 * (0 - g1) / 2 + (g2 + gm1) / 2));
  CHECK(fp0 == doctest::Approx((0.5 - 1) / 2 + h2 * g1 / 2 + (2 - g2 - gm1) / 2));
}

TEST_CASE("an exact imputation fit cancels the source terms") {
  // labels follow the sign of a, and gamma = (0, 60) reproduces them to e^-60
  CounterRng rng(3);
  RowMatrix xs(40, 2), xt(50, 2);
  Vector y(40);
  for (int i = 0; i < 40; ++i) {
    double a = rng.Normal();
    a += a >= 0.0 ? 1.0 : -1.0;
    xs.row(i) << 1, a;
    y[i] = a > 0;
  }
  for (int i = 0; i < 50; ++i) xt.row(i) << 1, rng.Normal();
  const Dataset d(xs, y, xt, 1);
  Vector alpha(2), gamma(2);
  alpha << 0.3, -0.2;
  gamma << 0.0, 60.0;
  const Vector scores = d.pooled_x().col(1);
  const auto [tp, fp] = TpFp(d, 0.2, scores, alpha, gamma);
  double expect = 0.0;
  for (int i = 0; i < 50; ++i) {
    if (scores[40 + i] >= 0.2) expect += Logistic(60.0 * scores[40 + i]) / 50;
  }
  CHECK(tp == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("calibrated rates at extreme cutoffs") {
  const Dataset d = fixtures::ShiftedLogistic(200, 300, 3, 6, 0.3, 4);
  const PreliminaryFits prelim = FitPreliminaryNuisances(d, 0.02, 0.02);
  Vector beta(3);
  beta << -0.3, 0.8, -0.6;
  const Vector scores = PooledScores(d, beta);
  const std::vector<double> grid = QuantileGrid(scores.head(d.n()), 50);
  std::vector<RocCalibration> cals;
  for (double c : grid) cals.push_back(CalibrateRocCutoffAuto(d, c, scores, prelim, 1.0));
  const auto [tpr_lo, fpr_lo] = TprFpr(d, scores.minCoeff() - 1.0, scores, cals);
  CHECK(tpr_lo == 1.0);
  CHECK(fpr_lo == 1.0);
  const auto [tpr_hi, fpr_hi] = TprFpr(d, scores.maxCoeff() + 1.0, scores, cals);
  CHECK(tpr_hi == 0.0);
  CHECK(fpr_hi == 0.0);
}

TEST_CASE("cutoff calibration: unit indicator reduces to the all-rows problem") {
  const Dataset d = fixtures::ShiftedLogistic(150, 200, 3, 6, 0.3, 6);
  const PreliminaryFits prelim = FitPreliminaryNuisances(d, 0.02, 0.02);
  Vector beta(3);
  beta << 0.0, 1.0, -1.0;
  const Vector scores = PooledScores(d, beta);
  const RocCalibration cal =
      CalibrateRocCutoff(d, -kInf, scores, prelim, 0.01, 0.015);
  CHECK(cal.effective == d.n());
  PenalizedProblem a = DensityRatioProblem(d, prelim.alpha.coef);
  a.sample_weights = (d.pooled_x() * prelim.gamma.coef).unaryExpr([](double v) {
    return LogisticDeriv(v);
  });
  a.lambda = 0.01;
  PenalizedProblem g = ImputationProblem(d, prelim.gamma.coef);
  g.sample_weights = DensityRatioValues(d, prelim.alpha.coef);
  g.lambda = 0.015;
  CHECK((SolvePenalized(a).coef.array() == cal.alpha.coef.array()).all());
  CHECK((SolvePenalized(g).coef.array() == cal.gamma.coef.array()).all());
  // the certificate bounds the imputation moment by its penalty level
  const Vector grad = LossGradient(g, cal.gamma.coef);
  CHECK(grad.tail(d.dim() - 1).cwiseAbs().maxCoeff() <= 0.015 + 1e-6);
}

TEST_CASE("cutoffs with fewer than 20 source rows above them are rejected") {
  const Dataset d = fixtures::ShiftedLogistic(100, 100, 2, 3, 0.0, 2);
  const PreliminaryFits prelim = FitPreliminaryNuisances(d, 0.05, 0.05);
  Vector beta(2);
  beta << 0.0, 1.0;
  const Vector scores = PooledScores(d, beta);
  std::vector<double> src(scores.data(), scores.data() + d.n());
  std::sort(src.begin(), src.end(), std::greater<double>());
  CHECK_NOTHROW(CalibrateRocCutoffAuto(d, src[19], scores, prelim, 1.0));
  CHECK_THROWS_AS(CalibrateRocCutoffAuto(d, src[18], scores, prelim, 1.0), EstimationError);
}

TEST_CASE("fitted curves are valid") {
  const Dataset d = fixtures::ShiftedLogistic(300, 600, 3, 8, 0.4, 10);
  const PreliminaryFits prelim = FitPreliminaryNuisances(d, 0.02, 0.02);
  const BetaEstimate beta = EstimateBeta(d, prelim, 1.0);
  const RocEstimate est = EstimateRoc(d, beta.beta, prelim, 60, 1.0);
  CHECK(est.segments == 5);
  CHECK(est.cutoffs.size() == 5);
  const RocCurve& c = est.curve;
  for (std::size_t k = 0; k < c.c.size(); ++k) {
    CHECK(c.tpr[k] >= 0.0);
    CHECK(c.tpr[k] <= 1.0);
    CHECK(c.fpr[k] >= 0.0);
    CHECK(c.fpr[k] <= 1.0);
    if (k > 0) {
      CHECK(c.tpr[k] <= c.tpr[k - 1]);
      CHECK(c.fpr[k] <= c.fpr[k - 1]);
    }
  }
  CHECK(RocAt(c, 1.0) == 1.0);
  CHECK(est.auc > 0.5);
  CHECK(est.auc <= 1.0);
  CHECK(RocAt(c, 0.1) <= RocAt(c, 0.2));
  const RocEstimate again = EstimateRoc(d, beta.beta, prelim, 60, 1.0, {}, 4);
  CHECK(again.auc == est.auc);
  CHECK_THROWS_AS(EstimateRoc(d, beta.beta, prelim, 10, 1.0), ValidationError);
}
