#ifndef DRAMATIC_ERRORS_H_
#define DRAMATIC_ERRORS_H_

#include <stdexcept>
#include <string>

#include "dramatic/types.h"

namespace dramatic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `row` is the 1-based data row (header excluded).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Penalized solver failed to certify a solution. Carries the last iterate.
class SolverError : public Error {
 public:
  enum class Kind { kNonConvergence, kDivergence };

  SolverError(Kind kind, const std::string& what, Vector last_coef,
              double residual)
      : Error(what),
        kind_(kind),
        last_coef_(std::move(last_coef)),
        residual_(residual) {}

  Kind kind() const { return kind_; }
  const Vector& last_coef() const { return last_coef_; }
  double residual() const { return residual_; }

 private:
  Kind kind_;
  Vector last_coef_;
  double residual_;
};

// Failures of the estimating-equation and accuracy layers (singular
// Jacobians, missing roots, degenerate prevalence, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

class DegenerateSplitError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace dramatic

#endif  // DRAMATIC_ERRORS_H_
