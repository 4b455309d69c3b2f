#include "dramatic/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "dramatic/errors.h"
#include "dramatic/inference.h"
#include "dramatic/numeric.h"
#include "dramatic/parallel.h"
#include "dramatic/roc_curve.h"

namespace dramatic {

namespace {

constexpr double kTruncation = 2.5;
constexpr int kMaxPoolRounds = 10;

// Column positions for q = 4.
constexpr int kA2 = 1, kA3 = 2, kA4 = 3, kW1 = 4, kW2 = 5, kW3 = 6, kW4 = 7;

enum : std::uint64_t { kStreamData = 0, kStreamPipeline = 1, kStreamBootstrap = 2 };

std::uint64_t RepSeed(std::uint64_t seed, int rep, std::uint64_t stream) {
  return CounterRng(seed).Split(static_cast<std::uint64_t>(rep)).Split(stream)();
}

double TruncatedDraw(CounterRng& rng) {
  for (;;) {
    const double z = rng.Normal();
    if (std::abs(z) < kTruncation) return z;
  }
}

std::string Fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const char* ConfigName(SimConfigId id) {
  switch (id) {
    case SimConfigId::kI:
      return "i";
    case SimConfigId::kII:
      return "ii";
    case SimConfigId::kIII:
      return "iii";
  }
  return "?";
}

SimConfigId ParseConfigId(const std::string& name) {
  if (name == "i") return SimConfigId::kI;
  if (name == "ii") return SimConfigId::kII;
  if (name == "iii") return SimConfigId::kIII;
  throw ValidationError("unknown config '" + name + "' (expected one of: i, ii, iii)");
}

void SimConfig::Validate() const {
  if (n < 1 || N < 1 || reps < 1) throw ValidationError("simulation counts must be positive");
  if (q != 4) throw ValidationError("simulation presets require q = 4");
  if (p < 4) throw ValidationError("simulation presets require p >= 4");
  if (n_min < 20 || n_min > n) throw ValidationError("n_min must lie in [20, n]");
  if (bootstrap < 0) throw ValidationError("bootstrap count must be non-negative");
}

ModelTruth TruthFlags(SimConfigId id) {
  return {id != SimConfigId::kIII, id != SimConfigId::kII};
}

namespace {

double OutcomeLogitScaled(SimConfigId id, const double* x, double scale) {
  double eta = x[0] + scale * (0.5 * x[kA2] - 0.5 * x[kA3] + 0.5 * x[kA4]) + 0.5 * x[kW1] +
               0.5 * x[kW2] - 0.5 * x[kW3];
  if (id == SimConfigId::kII) eta += 0.5 * x[kA2] * x[kA3] + 0.3 * x[kA4] * x[kA4];
  return eta;
}

}  // namespace

double OutcomeLogit(SimConfigId id, const double* x) { return OutcomeLogitScaled(id, x, 1.0); }

double SelectionLogit(SimConfigId id, const double* x) {
  double eta = -1.8 + 0.4 * x[kA2] - 0.3 * x[kA3] + 0.5 * x[kW1] - 0.4 * x[kW2] + 0.3 * x[kW4];
  if (id == SimConfigId::kIII) eta += 0.4 * x[kA2] * x[kA2] + 0.4 * x[kA3] * x[kW1];
  return eta;
}

double TruncatedNormalSd() {
  const boost::math::normal z;
  const double mass = 2.0 * boost::math::cdf(z, kTruncation) - 1.0;
  return std::sqrt(1.0 - 2.0 * kTruncation * boost::math::pdf(z, kTruncation) / mass);
}

RowMatrix GenerateU(int rows, int p, int q, CounterRng& rng) {
  if (rows < 1) throw ValidationError("rows must be positive");
  const int cols = p + q;
  const double inv_sd = 1.0 / TruncatedNormalSd();
  RowMatrix u(rows, cols);
  for (int i = 0; i < rows; ++i) {
    u(i, 0) = 1.0;
    for (int k = 1; k < cols; ++k) u(i, k) = TruncatedDraw(rng) * inv_sd;
  }
  return u;
}

RowMatrix GenerateU(int rows, int p, int q, std::uint64_t seed) {
  CounterRng rng(seed);
  return GenerateU(rows, p, q, rng);
}

SimDataset GenerateDataset(const SimConfig& cfg, int rep) {
  cfg.Validate();
  CounterRng rng(RepSeed(cfg.seed, rep, kStreamData));
  const int cols = cfg.p + cfg.q;
  const int block = 4 * (cfg.n + cfg.N);
  RowMatrix sx(cfg.n, cols), tx(cfg.N, cols);
  Vector sy(cfg.n), ty(cfg.N);
  int ns = 0, nt = 0;
  for (int round = 0; ns < cfg.n || nt < cfg.N; ++round) {
    if (round >= kMaxPoolRounds) {
      throw EstimationError("simulation pool exhausted after " +
                            std::to_string(kMaxPoolRounds) + " rounds");
    }
    const RowMatrix pool = GenerateU(block, cfg.p, cfg.q, rng);
    for (int i = 0; i < block; ++i) {
      const double* x = pool.row(i).data();
      const bool source = rng.Bernoulli(Logistic(SelectionLogit(cfg.id, x)));
      const double y = rng.Bernoulli(Logistic(OutcomeLogit(cfg.id, x))) ? 1.0 : 0.0;
      if (source && ns < cfg.n) {
        sx.row(ns) = pool.row(i);
        sy[ns++] = y;
      } else if (!source && nt < cfg.N) {
        tx.row(nt) = pool.row(i);
        ty[nt++] = y;
      }
    }
  }
  return {Dataset(std::move(sx), std::move(sy), std::move(tx), cfg.q), std::move(ty),
          TruthFlags(cfg.id)};
}

double SelectionRate(SimConfigId id, int draws, std::uint64_t seed) {
  CounterRng rng(seed);
  CompensatedSum s;
  const int chunk = 100000;
  for (int done = 0; done < draws; done += chunk) {
    const int rows = std::min(chunk, draws - done);
    const RowMatrix u = GenerateU(rows, 4, 4, rng);
    for (int i = 0; i < rows; ++i) s.Add(Logistic(SelectionLogit(id, u.row(i).data())));
  }
  return s.Value() / draws;
}

double TrueDensityRatio(SimConfigId id, const double* x, double selection_rate) {
  return std::exp(-SelectionLogit(id, x)) * selection_rate / (1.0 - selection_rate);
}

double GroundTruth::RocAtU(double u) const {
  for (std::size_t k = 0; k < roc_u.size(); ++k) {
    if (roc_u[k] == u) return roc0[k];
  }
  const auto it = std::lower_bound(roc_u.begin(), roc_u.end(), u);
  if (it == roc_u.begin()) return roc0.front();
  if (it == roc_u.end()) return roc0.back();
  const std::size_t hi = static_cast<std::size_t>(it - roc_u.begin());
  const double t = (u - roc_u[hi - 1]) / (roc_u[hi] - roc_u[hi - 1]);
  return roc0[hi - 1] + t * (roc0[hi] - roc0[hi - 1]);
}

namespace {

// Mann-Whitney placement-value standard error of the empirical AUC.
double PlacementSe(const Vector& scores, const Vector& y) {
  const Eigen::Index m = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
  const double n1 = y.sum();
  const double n0 = static_cast<double>(m) - n1;
  double pos_below = 0.0, neg_below = 0.0;
  double s10 = 0.0, ss10 = 0.0, s01 = 0.0, ss01 = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    double pg = 0.0, ng = 0.0;
    while (e < order.size() && scores[order[e]] == scores[order[k]]) {
      (y[order[e]] > 0.5 ? pg : ng) += 1.0;
      ++e;
    }
    const double v10 = (neg_below + 0.5 * ng) / n0;
    const double v01 = (n1 - pos_below - pg + 0.5 * pg) / n1;
    s10 += pg * v10;
    ss10 += pg * v10 * v10;
    s01 += ng * v01;
    ss01 += ng * v01 * v01;
    pos_below += pg;
    neg_below += ng;
    k = e;
  }
  const double var10 = (ss10 - s10 * s10 / n1) / (n1 - 1.0);
  const double var01 = (ss01 - s01 * s01 / n0) / (n0 - 1.0);
  return std::sqrt(var10 / n1 + var01 / n0);
}

}  // namespace

GroundTruth ComputeGroundTruth(SimConfigId id, int draws, std::uint64_t seed, double scale) {
  if (draws < 100) throw ValidationError("ground truth needs at least 100 draws");
  constexpr int kCols = 8;
  CounterRng rng(seed);
  RowMatrix x(draws, kCols);
  Vector y(draws);
  int filled = 0;
  const int chunk = 100000;
  while (filled < draws) {
    const RowMatrix u = GenerateU(chunk, 4, 4, rng);
    for (int i = 0; i < chunk && filled < draws; ++i) {
      const double* row = u.row(i).data();
      const bool source = rng.Bernoulli(Logistic(SelectionLogit(id, row)));
      const bool label = rng.Bernoulli(Logistic(OutcomeLogitScaled(id, row, scale)));
      if (source) continue;
      x.row(filled) = u.row(i);
      y[filled++] = label ? 1.0 : 0.0;
    }
  }
  GroundTruth gt;
  gt.draws = draws;
  gt.mu0 = y.mean();
  const RowMatrix a = x.leftCols(4);
  try {
    gt.beta0 = SolveWeightedLogistic(a, Vector::Ones(draws), y);
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("ground-truth Newton failed: ") + e.what());
  }
  const Vector scores = a * gt.beta0;
  Matrix bread = Matrix::Zero(4, 4), meat = Matrix::Zero(4, 4);
  for (int i = 0; i < draws; ++i) {
    const auto row = a.row(i);
    const double g = Logistic(scores[i]);
    bread.noalias() += (g * (1.0 - g)) * row.transpose() * row;
    meat.noalias() += ((y[i] - g) * (y[i] - g)) * row.transpose() * row;
  }
  bread /= draws;
  meat /= draws;
  const Matrix inv = bread.inverse();
  gt.beta0_se = ((inv * meat * inv).diagonal() / draws).cwiseSqrt();

  CurveInputs in;
  in.scores = scores;
  in.cutoffs = {0.0};
  in.terms = {CurveTerms{y, Vector::Ones(draws) - y}};
  const RocCurve curve = EvaluateCurve(in);
  gt.auc0 = Auc(curve);
  gt.auc0_se = PlacementSe(scores, y);
  for (int k = 0; k <= 100; ++k) {
    const double u = k / 100.0;
    gt.roc_u.push_back(u);
    gt.roc0.push_back(RocAt(curve, u));
  }
  return gt;
}

std::string RocTargetName(double u) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "roc_at_%g", u);
  return buf;
}

std::map<std::string, double> TruthValues(const GroundTruth& truth,
                                          const std::vector<double>& u) {
  std::map<std::string, double> out;
  for (Eigen::Index j = 0; j < truth.beta0.size(); ++j) {
    out["beta_" + std::to_string(j + 1)] = truth.beta0[j];
  }
  out["auc"] = truth.auc0;
  for (double v : u) out[RocTargetName(v)] = truth.RocAtU(v);
  return out;
}

namespace {

void Record(std::map<std::string, double>* dst, const Vector& beta, const RocCurve& curve,
            double auc, const std::vector<double>& u) {
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    (*dst)["beta_" + std::to_string(j + 1)] = beta[j];
  }
  (*dst)["auc"] = auc;
  for (double v : u) (*dst)[RocTargetName(v)] = RocAt(curve, v);
}

}  // namespace

RepEstimates RunRepetition(const SimConfig& cfg, int rep, const BenchmarkHooks* hooks) {
  RepEstimates est;
  try {
    const SimDataset sd = GenerateDataset(cfg, rep);
    const Dataset& d = sd.data;
    PipelineOptions opt;
    opt.n_min = cfg.n_min;
    opt.seed = RepSeed(cfg.seed, rep, kStreamPipeline);
    opt.threads = 1;
    opt.max_points = cfg.max_points;
    const PipelineResult fit = RunDramatic(d, opt);
    est.stats = fit.stats;
    for (const CoordinateCalibration& cal : fit.beta.per_coordinate) est.fallbacks += cal.fallback;
    Record(&est.dramatic, fit.beta.beta, fit.roc->curve, fit.roc->auc, cfg.u);
    if (cfg.bootstrap > 0) {
      BootstrapOptions bo;
      bo.replicates = cfg.bootstrap;
      bo.level = cfg.level;
      bo.seed = RepSeed(cfg.seed, rep, kStreamBootstrap);
      bo.u = cfg.u;
      bo.threads = 1;
      bo.max_points = cfg.max_points;
      const BootstrapReport br = MultiplierBootstrap(d, fit.beta, &*fit.roc, bo);
      est.bootstrap_dropped = br.dropped;
      for (const BootstrapResult& r : br.results) {
        if (r.method == "normal") est.ci[r.target] = {r.ci_lo, r.ci_hi};
      }
    }
    const BaselineResult iw = RunBaselineIw(d, fit.prelim, cfg.max_points);
    Record(&est.iw, iw.beta, iw.curve, iw.auc, cfg.u);
    const BaselineResult im = RunBaselineIm(d, fit.prelim, cfg.max_points);
    Record(&est.im, im.beta, im.curve, im.auc, cfg.u);
    if (hooks && hooks->observer) hooks->observer(rep, sd, fit, iw, im);
    est.ok = true;
  } catch (const Error& e) {
    est = RepEstimates();
    est.error = e.what();
  }
  return est;
}

const MethodTargetSummary& BenchmarkReport::Find(const std::string& method,
                                                 const std::string& target) const {
  for (const MethodTargetSummary& r : rows) {
    if (r.method == method && r.target == target) return r;
  }
  throw ValidationError("no summary for " + method + "/" + target);
}

BenchmarkReport RunBenchmark(const SimConfig& cfg, const GroundTruth& truth,
                             const BenchmarkHooks* hooks) {
  cfg.Validate();
  BenchmarkReport report;
  report.config = cfg;
  const std::map<std::string, double> truth_values = TruthValues(truth, cfg.u);
  for (int j = 1; j <= cfg.q; ++j) report.targets.push_back("beta_" + std::to_string(j));
  report.targets.push_back("auc");
  for (double v : cfg.u) report.targets.push_back(RocTargetName(v));

  report.per_rep.resize(static_cast<std::size_t>(cfg.reps));
  ParallelFor(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t r) {
    const int rep = static_cast<int>(r);
    if (hooks && hooks->estimator) {
      try {
        report.per_rep[r] = hooks->estimator(GenerateDataset(cfg, rep), rep);
      } catch (const Error& e) {
        report.per_rep[r].ok = false;
        report.per_rep[r].error = e.what();
      }
    } else {
      report.per_rep[r] = RunRepetition(cfg, rep, hooks);
    }
  });
  for (const RepEstimates& e : report.per_rep) report.failures += !e.ok;
  if (report.failures > 0.05 * cfg.reps) {
    throw EstimationError("benchmark: " + std::to_string(report.failures) + " of " +
                          std::to_string(cfg.reps) + " repetitions failed");
  }

  const std::pair<const char*, std::map<std::string, double> RepEstimates::*> methods[] = {
      {"DRAMATIC", &RepEstimates::dramatic}, {"IW", &RepEstimates::iw}, {"IM", &RepEstimates::im}};
  for (const auto& [name, member] : methods) {
    for (const std::string& target : report.targets) {
      const double t0 = truth_values.at(target);
      CompensatedSum err, sq;
      int count = 0, covered = 0, with_ci = 0, zero_width = 0;
      for (const RepEstimates& e : report.per_rep) {
        if (!e.ok) continue;
        const auto it = (e.*member).find(target);
        if (it == (e.*member).end()) continue;
        const double diff = it->second - t0;
        err.Add(diff);
        sq.Add(diff * diff);
        ++count;
        if (member == &RepEstimates::dramatic) {
          const auto ci = e.ci.find(target);
          if (ci != e.ci.end()) {
            ++with_ci;
            covered += ci->second.first <= t0 && t0 <= ci->second.second;
            zero_width += ci->second.first == ci->second.second;
          }
        }
      }
      MethodTargetSummary s;
      s.method = name;
      s.target = target;
      s.count = count;
      s.bias = count ? err.Value() / count : std::numeric_limits<double>::quiet_NaN();
      s.rmse = count ? std::sqrt(sq.Value() / count) : std::numeric_limits<double>::quiet_NaN();
      s.cp = with_ci ? static_cast<double>(covered) / with_ci
                     : std::numeric_limits<double>::quiet_NaN();
      s.cp_degenerate = with_ci > 0 && zero_width == with_ci;
      if (count) report.rows.push_back(s);
    }
  }
  return report;
}

std::string BenchmarkCsv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "method,target,bias,rmse,cp\n";
  for (const MethodTargetSummary& r : report.rows) {
    out << r.method << ',' << r.target << ',' << Fmt(r.bias) << ',' << Fmt(r.rmse) << ','
        << Fmt(r.cp) << '\n';
  }
  return out.str();
}

std::string BenchmarkTable(const BenchmarkReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "config %s  n=%d N=%d p=%d q=%d reps=%d failures=%d\n",
                ConfigName(report.config.id), report.config.n, report.config.N, report.config.p,
                report.config.q, report.config.reps, report.failures);
  out << line;
  std::snprintf(line, sizeof(line), "%-10s %-12s %10s %10s %8s\n", "method", "target", "bias",
                "rmse", "cp");
  out << line;
  for (const MethodTargetSummary& r : report.rows) {
    char cp[16];
    if (std::isnan(r.cp)) {
      std::snprintf(cp, sizeof(cp), "%s", "-");
    } else {
      std::snprintf(cp, sizeof(cp), "%.3f%s", r.cp, r.cp_degenerate ? "*" : "");
    }
    std::snprintf(line, sizeof(line), "%-10s %-12s %10.4f %10.4f %8s\n", r.method.c_str(),
                  r.target.c_str(), r.bias, r.rmse, cp);
    out << line;
  }
  return out.str();
}

std::string BenchmarkRepLog(const BenchmarkReport& report) {
  std::ostringstream out;
  for (std::size_t r = 0; r < report.per_rep.size(); ++r) {
    const RepEstimates& e = report.per_rep[r];
    out << "rep=" << r;
    if (!e.ok) {
      out << " status=failed error=\"" << e.error << "\"\n";
      continue;
    }
    out << " status=ok fallbacks=" << e.fallbacks << " bootstrap_dropped=" << e.bootstrap_dropped
        << " max_kkt=" << Fmt(e.stats.max_kkt);
    const std::pair<const char*, const std::map<std::string, double>*> groups[] = {
        {"dramatic", &e.dramatic}, {"iw", &e.iw}, {"im", &e.im}};
    for (const auto& [name, values] : groups) {
      for (const auto& [target, v] : *values) out << ' ' << name << '.' << target << '=' << Fmt(v);
    }
    for (const auto& [target, ci] : e.ci) {
      out << " ci." << target << "=[" << Fmt(ci.first) << ',' << Fmt(ci.second) << ']';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dramatic
