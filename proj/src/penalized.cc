#include "dramatic/penalized.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "dramatic/errors.h"
#include "dramatic/numeric.h"
#include "dramatic/rng.h"

namespace dramatic {

namespace {

constexpr double kExpClip = 30.0;
constexpr double kArmijo = 1e-4;
constexpr double kDivergenceCoef = 1e8;

double SoftThreshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Per-row loss value, first and second derivatives in eta.
struct RowTerms {
  double value;
  double d1;
  double d2;
};

inline RowTerms RowLoss(LossKind kind, double response, double weight, double eta,
                        bool clip) {
  if (kind == LossKind::kLogistic) {
    const double g = Logistic(eta);
    return {weight * (-response * eta + Log1pExp(eta)), weight * (g - response),
            weight * g * (1.0 - g)};
  }
  const double pos = response > 0.0 ? response : 0.0;
  const double neg = response < 0.0 ? -response : 0.0;
  const double e = std::exp(clip ? std::min(eta, kExpClip) : eta);
  return {weight * (pos * e - neg * eta), weight * (pos * e - neg),
          weight * pos * e};
}

double MaskedL1(const PenalizedProblem& prob, const Vector& delta) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < delta.size(); ++k) {
    if (prob.penalized[k]) s += std::abs(delta[k]);
  }
  return s;
}

double MeanLossAtEta(const PenalizedProblem& prob, const Vector& eta, bool clip) {
  CompensatedSum s;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double w = prob.sample_weights[i];
    if (w == 0.0) continue;
    s.Add(RowLoss(prob.loss, prob.responses[i], w, eta[i], clip).value);
  }
  return s.Value() / static_cast<double>(prob.rows());
}

double KktFromGradient(const PenalizedProblem& prob, const Vector& grad,
                       const Vector& delta) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    double v;
    if (!prob.penalized[k]) {
      v = std::abs(grad[k]);
    } else if (delta[k] == 0.0) {
      v = std::max(0.0, std::abs(grad[k]) - prob.lambda);
    } else {
      v = std::abs(grad[k] + (delta[k] > 0.0 ? prob.lambda : -prob.lambda));
    }
    worst = std::max(worst, v);
  }
  return worst;
}

// Working state of one solve.
class Solver {
 public:
  Solver(const PenalizedProblem& prob, const SolverOptions& options,
         const Vector* warm)
      : prob_(prob),
        options_(options),
        inv_rows_(1.0 / static_cast<double>(prob.rows())),
        delta_(warm ? *warm : Vector::Zero(prob.dim())) {
    eta_ = prob_.design * (prob_.offset + delta_);
    objective_ = Objective(eta_, delta_);
    d1_.resize(prob_.rows());
    d2_.resize(prob_.rows());
  }

  NuisanceFit Run() {
    const auto start = std::chrono::steady_clock::now();
    NuisanceFit fit;
    if (options_.record_trace) fit.objective_trace.push_back(objective_);
    double kkt = Derivatives();
    int iter = 0;
    double pg_step = 1.0;
    while (kkt > options_.tol) {
      if (iter >= options_.max_iter) {
        throw SolverError(SolverError::Kind::kNonConvergence,
                          std::string(LossKindName(prob_.loss)) +
                              " solver did not converge within " +
                              std::to_string(options_.max_iter) +
                              " iterations (kkt residual " +
                              std::to_string(kkt) + ")",
                          prob_.offset + delta_, kkt);
      }
      ++iter;
      bool moved = false;
      if (options_.backend == SolverBackend::kProximalNewton) {
        moved = NewtonStep(kkt);
      }
      if (!moved) moved = GradientStep(&pg_step);
      if (!moved) {
        throw SolverError(SolverError::Kind::kNonConvergence,
                          std::string(LossKindName(prob_.loss)) +
                              " solver stalled (kkt residual " +
                              std::to_string(kkt) + ")",
                          prob_.offset + delta_, kkt);
      }
      CheckDivergence();
      if (options_.record_trace) fit.objective_trace.push_back(objective_);
      kkt = Derivatives();
    }
    fit.delta = delta_;
    fit.coef = prob_.offset + delta_;
    fit.lambda = prob_.lambda;
    fit.kkt_residual = kkt;
    fit.objective = PenalizedObjective(prob_, delta_);
    fit.iterations = iter;
    fit.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start)
                      .count();
    return fit;
  }

 private:
  double Objective(const Vector& eta, const Vector& delta) const {
    return MeanLossAtEta(prob_, eta, /*clip=*/true) + prob_.lambda * MaskedL1(prob_, delta);
  }

  // Refreshes per-row derivatives and the gradient; returns the KKT residual.
  double Derivatives() {
    for (Eigen::Index i = 0; i < prob_.rows(); ++i) {
      const double w = prob_.sample_weights[i];
      if (w == 0.0) {
        d1_[i] = 0.0;
        d2_[i] = 0.0;
        continue;
      }
      const RowTerms t = RowLoss(prob_.loss, prob_.responses[i], w, eta_[i], false);
      d1_[i] = t.d1;
      d2_[i] = t.d2;
    }
    if (!d1_.allFinite()) {
      throw SolverError(SolverError::Kind::kDivergence,
                        std::string(LossKindName(prob_.loss)) +
                            " loss diverged (non-finite gradient)",
                        prob_.offset + delta_, std::numeric_limits<double>::infinity());
    }
    grad_ = inv_rows_ * (prob_.design.transpose() * d1_);
    return KktFromGradient(prob_, grad_, delta_);
  }

  void CheckDivergence() const {
    if (delta_.cwiseAbs().maxCoeff() > kDivergenceCoef || !std::isfinite(objective_)) {
      throw SolverError(SolverError::Kind::kDivergence,
                        std::string(LossKindName(prob_.loss)) +
                            " loss is unbounded below along the iterate path",
                        prob_.offset + delta_, std::numeric_limits<double>::infinity());
    }
  }

  // Tries to move along `dir` with an Armijo search. `predicted` is the
  // model decrease (negative for a descent direction).
  bool LineSearch(const Vector& dir, double predicted) {
    const Vector xd = prob_.design * dir;
    double t = 1.0;
    for (int halving = 0; halving < 60; ++halving) {
      Vector eta = eta_ + t * xd;
      Vector delta = delta_ + t * dir;
      const double f = Objective(eta, delta);
      const bool armijo = f <= objective_ + kArmijo * t * predicted;
      const bool noise_level =
          halving == 0 && f <= objective_ + 1e-13 * std::max(1.0, std::abs(objective_));
      if (armijo || noise_level) {
        delta_ = std::move(delta);
        eta_ = std::move(eta);
        objective_ = f;
        return true;
      }
      t *= 0.5;
    }
    return false;
  }

  bool NewtonStep(double kkt) {
    const Eigen::Index d = prob_.dim();
    // Curvature from rows with positive second derivative only.
    std::vector<Eigen::Index> active;
    active.reserve(prob_.rows());
    for (Eigen::Index i = 0; i < prob_.rows(); ++i) {
      if (d2_[i] > 0.0) active.push_back(i);
    }
    Matrix hess = Matrix::Zero(d, d);
    if (!active.empty()) {
      Matrix scaled(d, static_cast<Eigen::Index>(active.size()));
      for (std::size_t r = 0; r < active.size(); ++r) {
        const Eigen::Index i = active[r];
        scaled.col(static_cast<Eigen::Index>(r)) =
            std::sqrt(d2_[i] * inv_rows_) * prob_.design.row(i).transpose();
      }
      hess.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
      hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    }
    const double mean_diag = std::max(hess.diagonal().mean(), 1e-300);
    double ridge = 1e-10 * mean_diag + 1e-14;
    for (int attempt = 0; attempt < 6; ++attempt, ridge *= 100.0) {
      Matrix model = hess;
      model.diagonal().array() += ridge;
      const Vector z = SolveModel(model, std::max(1e-3 * kkt, 1e-13));
      const Vector dir = z - delta_;
      if (dir.cwiseAbs().maxCoeff() == 0.0) return false;
      const double predicted =
          grad_.dot(dir) + prob_.lambda * (MaskedL1(prob_, z) - MaskedL1(prob_, delta_));
      if (!(predicted < 0.0)) return false;
      if (LineSearch(dir, predicted)) return true;
    }
    return false;
  }

  // Coordinate descent on grad'(z - delta) + (z - delta)' H (z - delta) / 2
  // + lambda |z|_mask.
  Vector SolveModel(const Matrix& model, double inner_tol) const {
    const Eigen::Index d = prob_.dim();
    Vector z = delta_;
    Vector u = Vector::Zero(d);  // model * (z - delta)
    for (int sweep = 0; sweep < 10000; ++sweep) {
      double biggest = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double a = model(k, k);
        const double c = grad_[k] + u[k] - a * z[k];
        const double pen = prob_.penalized[k] ? prob_.lambda : 0.0;
        const double next = SoftThreshold(-c, pen) / a;
        const double change = next - z[k];
        if (change != 0.0) {
          u.noalias() += model.col(k) * change;
          z[k] = next;
          biggest = std::max(biggest, a * std::abs(change));
        }
      }
      if (biggest < inner_tol) break;
    }
    return z;
  }

  bool GradientStep(double* step) {
    const double f0 = MeanLossAtEta(prob_, eta_, true);
    for (int halving = 0; halving < 80; ++halving) {
      const double t = *step;
      Vector z(prob_.dim());
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        const double pen = prob_.penalized[k] ? prob_.lambda * t : 0.0;
        z[k] = SoftThreshold(delta_[k] - t * grad_[k], pen);
      }
      const Vector dir = z - delta_;
      if (dir.cwiseAbs().maxCoeff() == 0.0) return false;
      Vector eta = eta_ + prob_.design * dir;
      const double f = MeanLossAtEta(prob_, eta, true);
      const double bound = f0 + grad_.dot(dir) + dir.squaredNorm() / (2.0 * t);
      const double noise = 1e-13 * std::max(1.0, std::abs(f0));
      // Below the rounding level of f the descent bound is checked through
      // the gradient instead.
      const bool sufficient = std::abs(f - f0) <= noise ? LipschitzHolds(eta, dir, t)
                                                         : f <= bound;
      if (sufficient) {
        const double obj = f + prob_.lambda * MaskedL1(prob_, z);
        if (obj <= objective_ + 1e-13 * std::max(1.0, std::abs(objective_))) {
          delta_ = z;
          eta_ = std::move(eta);
          objective_ = obj;
          *step = t * 2.0;
          return true;
        }
      }
      *step = t * 0.5;
    }
    return false;
  }

  // (grad(eta_new) - grad)' dir <= |dir|^2 / t.
  bool LipschitzHolds(const Vector& eta_new, const Vector& dir, double t) const {
    Vector d1(prob_.rows());
    for (Eigen::Index i = 0; i < prob_.rows(); ++i) {
      const double w = prob_.sample_weights[i];
      d1[i] = w == 0.0 ? 0.0 : RowLoss(prob_.loss, prob_.responses[i], w, eta_new[i], false).d1;
    }
    if (!d1.allFinite()) return false;
    const Vector g = inv_rows_ * (prob_.design.transpose() * d1);
    return (g - grad_).dot(dir) <= dir.squaredNorm() / t;
  }

  const PenalizedProblem& prob_;
  const SolverOptions& options_;
  const double inv_rows_;
  Vector delta_;
  Vector eta_;
  Vector grad_;
  Vector d1_;
  Vector d2_;
  double objective_ = 0.0;
};

}  // namespace

const char* LossKindName(LossKind kind) {
  return kind == LossKind::kLogistic ? "logistic" : "exp_linear";
}

PenalizedProblem::PenalizedProblem(LossKind loss_kind, ConstRowMap design_matrix)
    : loss(loss_kind),
      design(design_matrix),
      responses(Vector::Zero(design_matrix.rows())),
      sample_weights(Vector::Ones(design_matrix.rows())),
      offset(Vector::Zero(design_matrix.cols())),
      penalized(InterceptFreeMask(design_matrix.cols())) {}

void PenalizedProblem::Validate() const {
  if (responses.size() != rows() || sample_weights.size() != rows()) {
    throw ValidationError("penalized problem: per-row vector length mismatch");
  }
  if (offset.size() != dim() || static_cast<Eigen::Index>(penalized.size()) != dim()) {
    throw ValidationError("penalized problem: offset/mask length mismatch");
  }
  if (!(lambda >= 0.0)) throw ValidationError("penalized problem: lambda < 0");
  if ((sample_weights.array() < 0.0).any() || !sample_weights.allFinite()) {
    throw ValidationError("penalized problem: negative or non-finite weight");
  }
  if (!(sample_weights.array() > 0.0).any()) {
    throw ValidationError("penalized problem: all sample weights are zero");
  }
  if (!offset.allFinite() || !responses.allFinite()) {
    throw ValidationError("penalized problem: non-finite offset or response");
  }
}

std::vector<char> InterceptFreeMask(Eigen::Index dim) {
  std::vector<char> mask(static_cast<std::size_t>(dim), 1);
  if (dim > 0) mask[0] = 0;
  return mask;
}

NuisanceFit SolvePenalized(const PenalizedProblem& prob, const SolverOptions& options,
                           const Vector* warm_delta) {
  prob.Validate();
  if (!(options.tol > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (warm_delta && warm_delta->size() != prob.dim()) {
    throw ValidationError("warm start has the wrong length");
  }
  Solver solver(prob, options, warm_delta);
  return solver.Run();
}

double SmoothLoss(const PenalizedProblem& prob, const Vector& coef) {
  const Vector eta = prob.design * coef;
  return MeanLossAtEta(prob, eta, /*clip=*/false);
}

Vector LossGradient(const PenalizedProblem& prob, const Vector& coef) {
  const Vector eta = prob.design * coef;
  Vector d1(prob.rows());
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    d1[i] = RowLoss(prob.loss, prob.responses[i], prob.sample_weights[i], eta[i], false).d1;
  }
  return (prob.design.transpose() * d1) / static_cast<double>(prob.rows());
}

double PenalizedObjective(const PenalizedProblem& prob, const Vector& delta) {
  return SmoothLoss(prob, prob.offset + delta) + prob.lambda * MaskedL1(prob, delta);
}

double KktResidual(const PenalizedProblem& prob, const Vector& coef) {
  const Vector delta = coef - prob.offset;
  return KktFromGradient(prob, LossGradient(prob, coef), delta);
}

double ScoreScale(const PenalizedProblem& prob) {
  prob.Validate();
  const Vector eta = prob.design * prob.offset;
  CompensatedSum s;
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    const double w = prob.sample_weights[i];
    if (w == 0.0) continue;
    const double d1 = RowLoss(prob.loss, prob.responses[i], w, eta[i], false).d1;
    s.Add(d1 * d1);
  }
  return std::sqrt(s.Value() / static_cast<double>(prob.rows()));
}

double SelfNormalizedPenalty(double kappa, const PenalizedProblem& prob, double log_term) {
  bool source = false;
  for (Eigen::Index i = 0; i < prob.rows() && !source; ++i) {
    source = prob.sample_weights[i] > 0.0 &&
             (prob.loss == LossKind::kLogistic || prob.responses[i] > 0.0);
  }
  if (!source) throw EstimationError("calibration problem has no source rows");
  return kappa * ScoreScale(prob) * std::sqrt(log_term / static_cast<double>(prob.rows()));
}

double NullPenaltyLevel(const PenalizedProblem& prob, const SolverOptions& options) {
  PenalizedProblem fixed = prob;
  fixed.lambda = std::numeric_limits<double>::max() / 4.0;
  const NuisanceFit fit = SolvePenalized(fixed, options);
  const Vector grad = LossGradient(prob, fit.coef);
  double level = 0.0;
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    if (prob.penalized[k]) level = std::max(level, std::abs(grad[k]));
  }
  return level;
}

std::vector<double> LogSpacedGrid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw ValidationError("invalid log-spaced grid bounds");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < count; ++k) {
    grid[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

namespace {

std::vector<int> AssignFolds(const PenalizedProblem& prob, int folds, CounterRng rng) {
  const Eigen::Index rows = prob.rows();
  std::vector<int> fold(static_cast<std::size_t>(rows), 0);
  std::vector<Eigen::Index> strata[2];
  for (Eigen::Index i = 0; i < rows; ++i) {
    const bool upper = prob.loss == LossKind::kLogistic ? prob.responses[i] >= 0.5
                                                        : prob.responses[i] > 0.0;
    strata[upper ? 1 : 0].push_back(i);
  }
  // Continue the round-robin across strata so fold sizes stay balanced.
  std::size_t position = 0;
  for (auto& stratum : strata) {
    for (std::size_t k = stratum.size(); k > 1; --k) {
      std::swap(stratum[k - 1], stratum[rng.Below(k)]);
    }
    for (Eigen::Index i : stratum) {
      fold[static_cast<std::size_t>(i)] = static_cast<int>(position++ % folds);
    }
  }
  return fold;
}

bool FoldsDegenerate(const PenalizedProblem& prob, const std::vector<int>& fold,
                     int folds) {
  if (prob.loss != LossKind::kLogistic) return false;
  for (int f = 0; f < folds; ++f) {
    bool seen[2][2] = {{false, false}, {false, false}};  // [heldout][label]
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      if (prob.sample_weights[i] <= 0.0) continue;
      const int part = fold[static_cast<std::size_t>(i)] == f ? 1 : 0;
      seen[part][prob.responses[i] >= 0.5 ? 1 : 0] = true;
    }
    if (!(seen[0][0] && seen[0][1] && seen[1][0] && seen[1][1])) return true;
  }
  return false;
}

}  // namespace

std::vector<double> CrossValidatedLosses(const PenalizedProblem& prob_template,
                                         std::span<const double> grid, int folds,
                                         std::uint64_t seed,
                                         const SolverOptions& options) {
  prob_template.Validate();
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (grid.empty()) throw ValidationError("cross-validation grid is empty");
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (grid[g] < grid[g - 1]) throw ValidationError("lambda grid must be ascending");
  }
  const CounterRng master(seed);
  std::vector<int> fold = AssignFolds(prob_template, folds, master.Split(0));
  if (FoldsDegenerate(prob_template, fold, folds)) {
    fold = AssignFolds(prob_template, folds, master.Split(1));
    if (FoldsDegenerate(prob_template, fold, folds)) {
      throw EstimationError(
          "cross-validation fold has degenerate responses (single label class)");
    }
  }

  const Eigen::Index rows = prob_template.rows();
  std::vector<double> losses(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    PenalizedProblem train = prob_template;
    Eigen::Index n_test = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (fold[static_cast<std::size_t>(i)] == f) ++n_test;
    }
    const double rescale = static_cast<double>(rows) / static_cast<double>(rows - n_test);
    for (Eigen::Index i = 0; i < rows; ++i) {
      train.sample_weights[i] =
          fold[static_cast<std::size_t>(i)] == f ? 0.0 : prob_template.sample_weights[i] * rescale;
    }
    if (!(train.sample_weights.array() > 0.0).any()) {
      throw EstimationError("cross-validation training fold has no weight");
    }
    Vector warm = Vector::Zero(prob_template.dim());
    for (std::size_t g = grid.size(); g-- > 0;) {
      train.lambda = grid[g];
      const NuisanceFit fit = SolvePenalized(train, options, &warm);
      warm = fit.delta;
      const Vector eta = prob_template.design * fit.coef;
      CompensatedSum held;
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (fold[static_cast<std::size_t>(i)] != f) continue;
        const double w = prob_template.sample_weights[i];
        if (w == 0.0) continue;
        held.Add(RowLoss(prob_template.loss, prob_template.responses[i], w, eta[i], false)
                     .value);
      }
      losses[g] += held.Value() / static_cast<double>(n_test) / folds;
    }
  }
  return losses;
}

double CrossValidateLambda(const PenalizedProblem& prob_template,
                           std::span<const double> grid, int folds, std::uint64_t seed,
                           const SolverOptions& options) {
  if (grid.size() == 1) {
    prob_template.Validate();
    return grid[0];
  }
  const std::vector<double> losses =
      CrossValidatedLosses(prob_template, grid, folds, seed, options);
  std::size_t best = 0;
  for (std::size_t g = 1; g < losses.size(); ++g) {
    if (losses[g] <= losses[best]) best = g;
  }
  return grid[best];
}

}  // namespace dramatic
