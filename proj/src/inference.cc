#include "dramatic/inference.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include <boost/math/distributions/normal.hpp>

#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/parallel.h"
#include "dramatic/rng.h"

namespace dramatic {

Vector BootstrapMultipliers(std::uint64_t seed, int b, Eigen::Index rows) {
  CounterRng rng(seed + static_cast<std::uint64_t>(b));
  Vector xi(rows);
  for (Eigen::Index i = 0; i < rows; ++i) xi[i] = rng.Exponential();
  return xi;
}

double NormalCriticalValue(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal(), (1.0 + level) / 2.0);
}

double SampleQuantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(prob, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::string UTag(double u) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "roc_at_%g", u);
  return buf;
}

double StdDev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  CompensatedSum s;
  for (double x : v) s.Add(x);
  const double mean = s.Value() / static_cast<double>(v.size());
  CompensatedSum ss;
  for (double x : v) ss.Add((x - mean) * (x - mean));
  return std::sqrt(ss.Value() / static_cast<double>(v.size() - 1));
}

}  // namespace

BootstrapReport MultiplierBootstrap(const Dataset& d, const BetaEstimate& beta,
                                    const RocEstimate* roc, const BootstrapOptions& options) {
  if (options.replicates < 1) throw ValidationError("bootstrap needs at least one replicate");
  const double z = NormalCriticalValue(options.level);
  const Eigen::Index rows = d.n() + d.N();

  BootstrapReport report;
  report.requested = options.replicates;
  std::vector<double> points;
  for (int j = 0; j < d.q(); ++j) {
    report.targets.push_back("beta_" + std::to_string(j + 1));
    points.push_back(beta.beta[j]);
  }
  if (roc) {
    report.targets.push_back("auc");
    points.push_back(roc->auc);
    for (double u : options.u) {
      report.targets.push_back(UTag(u));
      points.push_back(RocAt(roc->curve, u));
    }
  }

  const auto count = static_cast<std::size_t>(options.replicates);
  std::vector<std::optional<std::vector<double>>> reps(count);
  ParallelFor(count, options.threads, [&](std::size_t b) {
    const Vector xi = options.unit_multipliers
                          ? Vector::Ones(rows)
                          : BootstrapMultipliers(options.seed, static_cast<int>(b), rows);
    try {
      std::vector<double> out;
      const Vector beta_b = DrBeta(d, beta.per_coordinate, &xi);
      out.assign(beta_b.data(), beta_b.data() + beta_b.size());
      if (roc) {
        const RocCurve curve =
            ReevaluateCurve(*roc, PooledScores(d, beta_b), &xi, options.max_points);
        out.push_back(Auc(curve));
        for (double u : options.u) out.push_back(RocAt(curve, u));
      }
      reps[b] = std::move(out);
    } catch (const EstimationError&) {
      reps[b].reset();
    }
  });

  report.draws.assign(report.targets.size(), {});
  for (const auto& r : reps) {
    if (!r) {
      ++report.dropped;
      continue;
    }
    for (std::size_t t = 0; t < r->size(); ++t) report.draws[t].push_back((*r)[t]);
  }
  if (report.dropped > 0.05 * options.replicates) {
    throw EstimationError("bootstrap dropped " + std::to_string(report.dropped) + " of " +
                          std::to_string(options.replicates) + " replicates");
  }
  const int kept = options.replicates - report.dropped;
  const double tail = (1.0 - options.level) / 2.0;
  for (std::size_t t = 0; t < report.targets.size(); ++t) {
    const double se = StdDev(report.draws[t]);
    BootstrapResult normal{report.targets[t], "normal", points[t], se,
                           points[t] - z * se, points[t] + z * se, options.level, kept};
    BootstrapResult pct{report.targets[t],
                        "percentile",
                        points[t],
                        se,
                        SampleQuantile(report.draws[t], tail),
                        SampleQuantile(report.draws[t], 1.0 - tail),
                        options.level,
                        kept};
    report.results.push_back(normal);
    report.results.push_back(pct);
  }
  return report;
}

Vector InfluenceValuesBeta(const Dataset& d, const CoordinateCalibration& cal,
                           const Vector& beta) {
  const Matrix info = InformationMatrix(d, beta);
  const Vector w = CoordinateWeights(d, info, cal.j);
  const int rows = d.n() + d.N();
  const Vector scores = d.pooled_a() * beta;
  Vector out(rows);
  for (int i = 0; i < d.n(); ++i) {
    out[i] = w[i] * cal.h_source[i] * (d.source_y()[i] - cal.r_pooled[i]);
  }
  for (int i = d.n(); i < rows; ++i) {
    out[i] = w[i] * (cal.r_pooled[i] - Logistic(scores[i]));
  }
  return out;
}

double SandwichSe(const Dataset& d, const Vector& influence) {
  const Vector s = influence.head(d.n());
  const Vector t = influence.tail(d.N());
  const double var_s = (s.array() - s.mean()).square().sum() / d.n();
  const double var_t = (t.array() - t.mean()).square().sum() / d.N();
  return std::sqrt(var_s / d.n() + var_t / d.N());
}

}  // namespace dramatic
