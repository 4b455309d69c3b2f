#include <doctest.h>

#include <cmath>
#include <string>

#include "dramatic/errors.h"
#include "dramatic/sim.h"

using namespace dramatic;

namespace {

// Var of N(0,1) truncated to (-a, a): 1 - 2 a phi(a) / (2 Phi(a) - 1).
double TruncatedSdOracle(double a) {
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(a / std::sqrt(2.0));
  return std::sqrt(1.0 - 2.0 * a * phi / mass);
}

GroundTruth FlatTruth() {
  GroundTruth t;
  t.beta0 = Vector::LinSpaced(4, 0.5, 2.0);
  t.auc0 = 0.7;
  t.roc_u = {0.0, 0.1, 0.2, 1.0};
  t.roc0 = {0.0, 0.3, 0.45, 1.0};
  return t;
}

SimConfig Tiny() {
  SimConfig cfg;
  cfg.n = 40;
  cfg.N = 60;
  cfg.p = 6;
  cfg.n_min = 20;
  cfg.reps = 10;
  return cfg;
}

RepEstimates Shifted(const GroundTruth& truth, const std::vector<double>& u, double shift,
                     bool exact_ci) {
  RepEstimates e;
  e.ok = true;
  for (const auto& [name, value] : TruthValues(truth, u)) {
    e.dramatic[name] = value + shift;
    e.iw[name] = value - shift;
    e.im[name] = value;
    if (exact_ci) e.ci[name] = {value, value};
  }
  return e;
}

}  // namespace

TEST_CASE("config names parse and unknown names list the valid ones") {
  CHECK(ParseConfigId("i") == SimConfigId::kI);
  CHECK(ParseConfigId("ii") == SimConfigId::kII);
  CHECK(ParseConfigId("iii") == SimConfigId::kIII);
  CHECK(std::string(ConfigName(SimConfigId::kIII)) == "iii");
  CHECK_THROWS_WITH_AS(ParseConfigId("iv"), doctest::Contains("i, ii, iii"), ValidationError);
  CHECK(TruthFlags(SimConfigId::kII).imputation_correct == false);
  CHECK(TruthFlags(SimConfigId::kIII).density_ratio_correct == false);
  CHECK(TruthFlags(SimConfigId::kI).density_ratio_correct);
}

TEST_CASE("covariates are truncated normals standardized to unit variance") {
  CHECK(TruncatedNormalSd() == doctest::Approx(TruncatedSdOracle(2.5)).epsilon(1e-12));
  const RowMatrix u = GenerateU(40000, 3, 2, 17);
  CHECK(u.cols() == 5);
  CHECK((u.col(0).array() == 1.0).all());
  const double bound = 2.5 / TruncatedNormalSd();
  for (int k = 1; k < 5; ++k) {
    const auto c = u.col(k);
    CHECK(c.cwiseAbs().maxCoeff() < bound);
    CHECK(c.mean() == doctest::Approx(0.0).epsilon(0.02));
    CHECK((c.array().square().mean()) == doctest::Approx(1.0).epsilon(0.03));
  }
  CHECK((GenerateU(50, 3, 2, 17).array() == u.topRows(50).array()).all());
}

TEST_CASE("generated datasets are reproducible per repetition") {
  const SimConfig cfg = Tiny();
  const SimDataset a = GenerateDataset(cfg, 3);
  const SimDataset b = GenerateDataset(cfg, 3);
  const SimDataset c = GenerateDataset(cfg, 4);
  CHECK(a.data.n() == 40);
  CHECK(a.data.N() == 60);
  CHECK(a.data.q() == 4);
  CHECK(a.data.p() == 6);
  CHECK((a.data.pooled_x().array() == b.data.pooled_x().array()).all());
  CHECK_FALSE((a.data.pooled_x().array() == c.data.pooled_x().array()).all());
  CHECK(a.hidden_target_y.size() == 60);
}

TEST_CASE("config validation") {
  SimConfig cfg = Tiny();
  cfg.q = 3;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
  cfg = Tiny();
  cfg.n_min = 41;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
  cfg = Tiny();
  cfg.p = 3;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
}

TEST_CASE("estimates equal to the truth give zero bias and exact coverage") {
  const GroundTruth truth = FlatTruth();
  const SimConfig cfg = Tiny();
  BenchmarkHooks hooks;
  hooks.estimator = [&](const SimDataset&, int) { return Shifted(truth, cfg.u, 0.0, true); };
  const BenchmarkReport r = RunBenchmark(cfg, truth, &hooks);
  CHECK(r.failures == 0);
  for (const std::string& target : r.targets) {
    const MethodTargetSummary& s = r.Find("DRAMATIC", target);
    CHECK(s.bias == 0.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.cp == 1.0);
    CHECK(s.cp_degenerate);
    CHECK(s.count == 10);
  }
  CHECK(r.Find("DRAMATIC", "roc_at_0.1").target == "roc_at_0.1");
}

TEST_CASE("a constant offset shows up as bias and rmse") {
  const GroundTruth truth = FlatTruth();
  const SimConfig cfg = Tiny();
  BenchmarkHooks hooks;
  hooks.estimator = [&](const SimDataset&, int) { return Shifted(truth, cfg.u, 0.1, false); };
  const BenchmarkReport r = RunBenchmark(cfg, truth, &hooks);
  for (const std::string& target : r.targets) {
    CHECK(r.Find("DRAMATIC", target).bias == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.Find("DRAMATIC", target).rmse == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.Find("IW", target).bias == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(r.Find("IM", target).bias == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isnan(r.Find("IW", target).cp));
  }
  const std::string csv = BenchmarkCsv(r);
  CHECK(csv.rfind("method,target,bias,rmse,cp\n", 0) == 0);
  CHECK(BenchmarkTable(r).find("DRAMATIC") != std::string::npos);
}

TEST_CASE("too many failed repetitions abort the benchmark") {
  const GroundTruth truth = FlatTruth();
  const SimConfig cfg = Tiny();
  BenchmarkHooks hooks;
  hooks.estimator = [&](const SimDataset&, int rep) -> RepEstimates {
    if (rep < 2) throw EstimationError("synthetic failure");
    return Shifted(truth, cfg.u, 0.0, false);
  };
  CHECK_THROWS_AS(RunBenchmark(cfg, truth, &hooks), EstimationError);
}

TEST_CASE("interpolated truth between tabulated fpr values") {
  const GroundTruth t = FlatTruth();
  CHECK(t.RocAtU(0.1) == 0.3);
  CHECK(t.RocAtU(0.15) == doctest::Approx(0.375));
  CHECK(t.RocAtU(0.6) == doctest::Approx(0.45 + 0.55 * 0.5));
}

TEST_CASE("ground truth without risk-factor signal has AUC one half") {
  const GroundTruth flat = ComputeGroundTruth(SimConfigId::kI, 200000, 5, 0.0);
  CHECK(flat.auc0 == doctest::Approx(0.5).epsilon(0.01));
  const GroundTruth base = ComputeGroundTruth(SimConfigId::kI, 200000, 5, 1.0);
  const GroundTruth strong = ComputeGroundTruth(SimConfigId::kI, 200000, 5, 2.0);
  CHECK(strong.auc0 > base.auc0 + 0.02);
  CHECK(base.beta0.size() == 4);
  CHECK(base.roc0.front() <= base.roc0.back());
  CHECK_THROWS_AS(ComputeGroundTruth(SimConfigId::kI, 50, 5), ValidationError);
}
