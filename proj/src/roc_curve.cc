#include "dramatic/roc_curve.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "dramatic/errors.h"

namespace dramatic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinDenominator = 1e-6;

// Running Neumaier prefix sums: out[k] = sum of the first k values.
std::vector<double> PrefixSums(const std::vector<double>& values) {
  std::vector<double> out(values.size() + 1, 0.0);
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
    out[k + 1] = sum + comp;
  }
  return out;
}

}  // namespace

int NearestCutoff(const std::vector<double>& cutoffs, double c) {
  if (cutoffs.empty()) throw ValidationError("empty cutoff grid");
  const auto it = std::lower_bound(cutoffs.begin(), cutoffs.end(), c);
  if (it == cutoffs.begin()) return 0;
  if (it == cutoffs.end()) return static_cast<int>(cutoffs.size()) - 1;
  const int hi = static_cast<int>(it - cutoffs.begin());
  const int lo = hi - 1;
  return (cutoffs[hi] - c) < (c - cutoffs[lo]) ? hi : lo;
}

std::vector<double> MonotoneFromHigh(const std::vector<double>& raw) {
  std::vector<double> out(raw.size());
  double running = 0.0;
  for (std::size_t k = raw.size(); k-- > 0;) {
    const double clamped = std::clamp(raw[k], 0.0, 1.0);
    running = std::max(running, clamped);
    out[k] = running;
  }
  return out;
}

RocCurve EvaluateCurve(const CurveInputs& in, int max_points) {
  const Eigen::Index rows = in.scores.size();
  if (in.terms.empty() || in.terms.size() != in.cutoffs.size()) {
    throw ValidationError("curve needs one term set per cutoff");
  }
  if (!std::is_sorted(in.cutoffs.begin(), in.cutoffs.end())) {
    throw ValidationError("cutoffs must be ascending");
  }
  for (const CurveTerms& t : in.terms) {
    if (t.tp.size() != rows || t.fp.size() != rows) {
      throw ValidationError("curve term length does not match scores");
    }
  }
  if (in.multipliers && in.multipliers->size() != rows) {
    throw ValidationError("multiplier length does not match scores");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return in.scores[a] > in.scores[b];
  });

  const std::size_t sets = in.terms.size();
  std::vector<std::vector<double>> tp_prefix(sets), fp_prefix(sets);
  std::vector<double> buf_tp(static_cast<std::size_t>(rows)), buf_fp(buf_tp.size());
  for (std::size_t k = 0; k < sets; ++k) {
    for (std::size_t r = 0; r < order.size(); ++r) {
      const Eigen::Index i = order[r];
      const double m = in.multipliers ? (*in.multipliers)[i] : 1.0;
      buf_tp[r] = m * in.terms[k].tp[i];
      buf_fp[r] = m * in.terms[k].fp[i];
    }
    tp_prefix[k] = PrefixSums(buf_tp);
    fp_prefix[k] = PrefixSums(buf_fp);
  }

  RocCurve curve;
  curve.tp_total = tp_prefix[0].back();
  curve.fp_total = fp_prefix[0].back();
  if (!(curve.tp_total > kMinDenominator) || !(curve.fp_total > kMinDenominator)) {
    throw EstimationError("degenerate prevalence: TP(-inf) = " +
                          std::to_string(curve.tp_total) +
                          ", FP(-inf) = " + std::to_string(curve.fp_total));
  }

  // Distinct scores descending with the count of rows at or above each.
  std::vector<std::pair<double, std::size_t>> levels;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double s = in.scores[order[r]];
    if (!levels.empty() && levels.back().first == s) {
      levels.back().second = r + 1;
    } else {
      levels.emplace_back(s, r + 1);
    }
  }
  if (max_points > 0 && levels.size() > static_cast<std::size_t>(max_points)) {
    std::vector<std::pair<double, std::size_t>> subset;
    const std::size_t total = levels.size();
    for (int k = 0; k < max_points; ++k) {
      const std::size_t idx =
          max_points == 1 ? 0
                          : static_cast<std::size_t>(
                                std::llround(static_cast<double>(k) * (total - 1) /
                                             (max_points - 1)));
      if (subset.empty() || subset.back().first != levels[idx].first) {
        subset.push_back(levels[idx]);
      }
    }
    levels = std::move(subset);
  }

  auto push = [&](double c, double tp, double fp) {
    curve.c.push_back(c);
    curve.tpr_raw.push_back(tp / curve.tp_total);
    curve.fpr_raw.push_back(fp / curve.fp_total);
  };
  push(-kInf, curve.tp_total, curve.fp_total);
  for (std::size_t k = levels.size(); k-- > 0;) {
    const auto [c, count] = levels[k];
    const int set = NearestCutoff(in.cutoffs, c);
    push(c, tp_prefix[static_cast<std::size_t>(set)][count],
         fp_prefix[static_cast<std::size_t>(set)][count]);
  }
  push(kInf, 0.0, 0.0);
  curve.tpr = MonotoneFromHigh(curve.tpr_raw);
  curve.fpr = MonotoneFromHigh(curve.fpr_raw);
  return curve;
}

double RocAt(const RocCurve& curve, double u) {
  if (curve.c.empty()) throw ValidationError("empty curve");
  // fpr is non-increasing in c; the first ascending index with fpr <= u is the
  // infimum of the qualifying cutoffs.
  for (std::size_t k = 0; k < curve.c.size(); ++k) {
    if (curve.fpr[k] <= u) return curve.tpr[k];
  }
  return curve.tpr.back();
}

double Auc(const std::vector<double>& fpr, const std::vector<double>& tpr) {
  if (fpr.size() != tpr.size()) throw ValidationError("fpr/tpr length mismatch");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(fpr.size() + 2);
  pts.emplace_back(0.0, 0.0);
  for (std::size_t k = 0; k < fpr.size(); ++k) pts.emplace_back(fpr[k], tpr[k]);
  pts.emplace_back(1.0, 1.0);
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].first - pts[k - 1].first) * (pts[k].second + pts[k - 1].second) / 2.0;
  }
  return area;
}

double Auc(const RocCurve& curve) { return Auc(curve.fpr, curve.tpr); }

}  // namespace dramatic
