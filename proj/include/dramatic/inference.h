#ifndef DRAMATIC_INFERENCE_H_
#define DRAMATIC_INFERENCE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dramatic/beta_dr.h"
#include "dramatic/roc_dr.h"

namespace dramatic {

struct BootstrapOptions {
  int replicates = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::vector<double> u = {0.1, 0.2};
  unsigned threads = 1;
  int max_points = 0;
  // Test hook: every multiplier set to 1.
  bool unit_multipliers = false;
};

struct BootstrapResult {
  std::string target;  // beta_<j>, auc or roc_at_<u>
  std::string method;  // normal or percentile
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.0;
  int replicates = 0;  // replicates kept
};

struct BootstrapReport {
  std::vector<BootstrapResult> results;
  int requested = 0;
  int dropped = 0;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> draws;  // per target, per kept replicate
};

// Per-row exp(1) multipliers of replicate b (stream seed + b).
Vector BootstrapMultipliers(std::uint64_t seed, int b, Eigen::Index rows);

// Multiplier bootstrap with every nuisance fit and the cutoff grid held
// fixed. Beta is re-solved per coordinate for each replicate; when `roc` is
// non-null the curve is recomputed from multiplier-weighted terms at the
// replicate scores. Failed replicates are dropped; more than 5% failures
// throws EstimationError.
BootstrapReport MultiplierBootstrap(const Dataset& d, const BetaEstimate& beta,
                                    const RocEstimate* roc, const BootstrapOptions& options);

// Normal quantile z_{(1 + level) / 2}.
double NormalCriticalValue(double level);

// Linear-interpolation sample quantile, prob in [0,1].
double SampleQuantile(std::vector<double> values, double prob);

// Influence values of coordinate j on every pooled row:
// e_j' Sigma^{-1} A_i h_i (Y_i - r_i) on source rows and
// e_j' Sigma^{-1} A_i (r_i - g(A_i'beta)) on target rows, Sigma at beta.
Vector InfluenceValuesBeta(const Dataset& d, const CoordinateCalibration& cal,
                           const Vector& beta);

// sqrt(var_S / n + var_T / N) from pooled influence values.
double SandwichSe(const Dataset& d, const Vector& influence);

}  // namespace dramatic

#endif  // DRAMATIC_INFERENCE_H_
