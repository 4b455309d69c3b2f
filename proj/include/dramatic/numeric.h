#ifndef DRAMATIC_NUMERIC_H_
#define DRAMATIC_NUMERIC_H_

#include <cmath>

namespace dramatic {

// Logistic link g(x) = 1 / (1 + exp(-x)).
inline double Logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Derivative g(x) (1 - g(x)).
inline double LogisticDeriv(double x) {
  const double g = Logistic(x);
  return g * (1.0 - g);
}

// G(x) = log(1 + exp(x)), the antiderivative of g.
inline double Log1pExp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void Add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double Value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace dramatic

#endif  // DRAMATIC_NUMERIC_H_
