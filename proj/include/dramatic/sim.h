#ifndef DRAMATIC_SIM_H_
#define DRAMATIC_SIM_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dramatic/dataset.h"
#include "dramatic/pipeline.h"
#include "dramatic/rng.h"

namespace dramatic {

// Generator presets:
//   i   selection and outcome logits both linear in x;
//   ii  outcome logit gains 0.5 x2 x3 + 0.3 x4^2 (imputation misspecified);
//   iii selection logit gains 0.4 x2^2 + 0.4 x3 x5 (density ratio misspecified).
// Columns are x1 = 1, x2..x4 = a_2..a_4, x5.. = w_1..w_p.
enum class SimConfigId { kI, kII, kIII };

const char* ConfigName(SimConfigId id);

// Accepts "i", "ii" or "iii"; anything else throws ValidationError listing
// the valid names.
SimConfigId ParseConfigId(const std::string& name);

struct SimConfig {
  SimConfigId id = SimConfigId::kI;
  int n = 600;
  int N = 3000;
  int p = 100;
  int q = 4;
  int reps = 200;
  std::uint64_t seed = 1;
  int n_min = 120;
  int bootstrap = 500;
  double level = 0.95;
  std::vector<double> u = {0.1, 0.2};
  unsigned threads = 1;
  int max_points = 0;

  void Validate() const;
};

struct ModelTruth {
  bool density_ratio_correct = true;
  bool imputation_correct = true;
};

ModelTruth TruthFlags(SimConfigId id);

// Outcome and selection logits of a feature row (intercept first, q = 4,
// at least 4 adjustment columns).
double OutcomeLogit(SimConfigId id, const double* x);
double SelectionLogit(SimConfigId id, const double* x);

// Standard deviation of N(0,1) truncated to (-2.5, 2.5).
double TruncatedNormalSd();

// rows x (q + p) design: column 0 is 1, the others are i.i.d. N(0,1)
// truncated to (-2.5, 2.5) and standardized by the truncated law.
RowMatrix GenerateU(int rows, int p, int q, std::uint64_t seed);
RowMatrix GenerateU(int rows, int p, int q, CounterRng& rng);

struct SimDataset {
  Dataset data;
  Vector hidden_target_y;  // oracle checks only
  ModelTruth truth;
};

SimDataset GenerateDataset(const SimConfig& cfg, int rep);

// Monte-Carlo P(S = 1) of the selection model.
double SelectionRate(SimConfigId id, int draws, std::uint64_t seed);

// True density ratio p(x|T)/p(x|S) given the population selection rate.
double TrueDensityRatio(SimConfigId id, const double* x, double selection_rate);

struct GroundTruth {
  Vector beta0;
  Vector beta0_se;
  double auc0 = 0.0;
  double auc0_se = 0.0;
  std::vector<double> roc_u;
  std::vector<double> roc0;
  double mu0 = 0.0;
  int draws = 0;

  double RocAtU(double u) const;
};

// Target-population truth from `draws` labeled target samples. Only the
// columns entering either model are simulated. `scale` multiplies the
// risk-factor outcome coefficients (1 = preset).
GroundTruth ComputeGroundTruth(SimConfigId id, int draws, std::uint64_t seed,
                               double scale = 1.0);

// Truth values keyed by target name (beta_<j>, auc, roc_at_<u>).
std::map<std::string, double> TruthValues(const GroundTruth& truth,
                                          const std::vector<double>& u);

std::string RocTargetName(double u);

struct RepEstimates {
  bool ok = false;
  std::string error;
  std::map<std::string, double> dramatic;
  std::map<std::string, double> iw;
  std::map<std::string, double> im;
  std::map<std::string, std::pair<double, double>> ci;  // DRAMATIC normal CIs
  FitStats stats;
  int fallbacks = 0;
  int bootstrap_dropped = 0;
};

struct MethodTargetSummary {
  std::string method;
  std::string target;
  double bias = 0.0;
  double rmse = 0.0;
  double cp = 0.0;  // NaN when not applicable
  bool cp_degenerate = false;  // every interval had zero width
  int count = 0;
};

struct BenchmarkReport {
  SimConfig config;
  std::vector<std::string> targets;
  std::vector<MethodTargetSummary> rows;
  std::vector<RepEstimates> per_rep;
  int failures = 0;

  const MethodTargetSummary& Find(const std::string& method, const std::string& target) const;
};

struct BenchmarkHooks {
  // Replaces the DRAMATIC/IW/IM fits of a repetition.
  std::function<RepEstimates(const SimDataset&, int rep)> estimator;
  // Sees the fits of every successful default repetition. Runs on the worker
  // thread of that repetition.
  std::function<void(int rep, const SimDataset&, const PipelineResult&, const BaselineResult& iw,
                     const BaselineResult& im)>
      observer;
};

// One repetition: generate, fit DRAMATIC with bootstrap, fit both baselines.
RepEstimates RunRepetition(const SimConfig& cfg, int rep, const BenchmarkHooks* hooks = nullptr);

// Runs cfg.reps repetitions and summarizes against `truth`. More than 5%
// failed repetitions throws EstimationError.
BenchmarkReport RunBenchmark(const SimConfig& cfg, const GroundTruth& truth,
                             const BenchmarkHooks* hooks = nullptr);

// method,target,bias,rmse,cp rows.
std::string BenchmarkCsv(const BenchmarkReport& report);
// Aligned human-readable table.
std::string BenchmarkTable(const BenchmarkReport& report);
// One line per repetition with every estimate.
std::string BenchmarkRepLog(const BenchmarkReport& report);

}  // namespace dramatic

#endif  // DRAMATIC_SIM_H_
