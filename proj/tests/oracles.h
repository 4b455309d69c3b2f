#ifndef DRAMATIC_TESTS_ORACLES_H_
#define DRAMATIC_TESTS_ORACLES_H_

// Brute-force reference computations written without the library's solver,
// equation or curve code.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dramatic/dataset.h"
#include "dramatic/penalized.h"
#include "dramatic/rng.h"
#include "dramatic/types.h"

namespace oracle {

using dramatic::Matrix;
using dramatic::RowMatrix;
using dramatic::Vector;

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Plain per-row loss and gradient of a penalized problem.
inline double Loss(const dramatic::PenalizedProblem& p, const Vector& coef) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double eta = p.design.row(i).dot(coef);
    double li;
    if (p.loss == dramatic::LossKind::kLogistic) {
      li = -p.responses[i] * eta + Softplus(eta);
    } else {
      const double r = p.responses[i];
      li = r > 0 ? r * std::exp(eta) : (-r) * (-eta);
    }
    s += p.sample_weights[i] * li;
  }
  return s / static_cast<double>(p.rows());
}

inline Vector Grad(const dramatic::PenalizedProblem& p, const Vector& coef) {
  Vector g = Vector::Zero(p.dim());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double eta = p.design.row(i).dot(coef);
    double d;
    if (p.loss == dramatic::LossKind::kLogistic) {
      d = Sigmoid(eta) - p.responses[i];
    } else {
      const double r = p.responses[i];
      d = r > 0 ? r * std::exp(eta) : r;
    }
    g += (p.sample_weights[i] * d) * p.design.row(i).transpose();
  }
  return g / static_cast<double>(p.rows());
}

inline double SoftThreshold(double z, double t) {
  return z > t ? z - t : (z < -t ? z + t : 0.0);
}

// Proximal gradient with backtracking, run until the gradient mapping has sup-norm
// below `tol`. Returns offset + delta.
inline Vector ProximalGradient(const dramatic::PenalizedProblem& p, double tol = 1e-12,
                               int max_iter = 2000000) {
  Vector delta = Vector::Zero(p.dim());
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector coef = p.offset + delta;
    const double f = Loss(p, coef);
    const Vector g = Grad(p, coef);
    Vector next(delta.size());
    for (;;) {
      for (Eigen::Index k = 0; k < delta.size(); ++k) {
        const double z = delta[k] - step * g[k];
        next[k] = p.penalized[k] ? SoftThreshold(z, step * p.lambda) : z;
      }
      const Vector diff = next - delta;
      const double f_next = Loss(p, p.offset + next);
      if (f_next <= f + g.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15) break;
      step *= 0.5;
    }
    const double mapping = (next - delta).cwiseAbs().maxCoeff() / step;
    delta = next;
    step *= 1.5;
    if (mapping < tol) break;
  }
  return p.offset + delta;
}

// Residual of the augmented estimating equation written out directly.
inline Vector EquationResidual(const dramatic::Dataset& d, const Vector& h, const Vector& r,
                               const Vector& beta) {
  const int q = d.q();
  Vector s = Vector::Zero(q), t = Vector::Zero(q);
  for (int i = 0; i < d.n(); ++i) {
    const Vector a = d.source_x().row(i).head(q).transpose();
    s += h[i] * a * (d.source_y()[i] - r[i]);
  }
  for (int i = 0; i < d.N(); ++i) {
    const Vector a = d.target_x().row(i).head(q).transpose();
    t += a * (r[d.n() + i] - Sigmoid(a.dot(beta)));
  }
  return s / d.n() + t / d.N();
}

// Root of the estimating equation by cyclic coordinate bisection: each
// coordinate of the residual is decreasing in its own beta coordinate, so a
// bracketed bisection per coordinate, swept until the sup-norm residual is
// below tol, converges to the unique root.
inline Vector BisectionRoot(const dramatic::Dataset& d, const Vector& h, const Vector& r,
                            double tol = 1e-11, int sweeps = 100000) {
  Vector beta = Vector::Zero(d.q());
  for (int s = 0; s < sweeps; ++s) {
    for (int j = 0; j < d.q(); ++j) {
      double lo = -25.0, hi = 25.0;
      for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        beta[j] = 0.5 * (lo + hi);
        if (EquationResidual(d, h, r, beta)[j] > 0.0) {
          lo = beta[j];
        } else {
          hi = beta[j];
        }
      }
      beta[j] = 0.5 * (lo + hi);
    }
    if (EquationResidual(d, h, r, beta).cwiseAbs().maxCoeff() < tol) break;
  }
  return beta;
}

// Empirical TPR/FPR at cutoff c of labeled scores.
inline std::pair<double, double> EmpiricalRates(const std::vector<double>& score,
                                                const std::vector<double>& label, double c) {
  double tp = 0, fp = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (label[i] > 0.5) {
      pos += 1;
      tp += score[i] >= c;
    } else {
      neg += 1;
      fp += score[i] >= c;
    }
  }
  return {tp / pos, fp / neg};
}

// Mann-Whitney AUC with half credit for ties.
inline double MannWhitneyAuc(const std::vector<double>& score, const std::vector<double>& label) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (label[i] < 0.5) continue;
    for (std::size_t k = 0; k < score.size(); ++k) {
      if (label[k] > 0.5) continue;
      pairs += 1;
      wins += score[i] > score[k] ? 1.0 : (score[i] == score[k] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Gaussian design with an intercept column.
inline RowMatrix GaussianDesign(int rows, int cols, dramatic::CounterRng& rng) {
  RowMatrix x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    x(i, 0) = 1.0;
    for (int k = 1; k < cols; ++k) x(i, k) = rng.Normal();
  }
  return x;
}

}  // namespace oracle

#endif  // DRAMATIC_TESTS_ORACLES_H_
