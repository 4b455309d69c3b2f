#ifndef DRAMATIC_DATASET_H_
#define DRAMATIC_DATASET_H_

#include <string>
#include <vector>

#include "dramatic/types.h"

namespace dramatic {

// Labeled source cohort (S = 1) and unlabeled target cohort (S = 0) sharing a
// feature layout X = (A, W): the first q columns are the risk factors with
// column 0 the intercept, the remaining p columns are adjustment covariates.
//
// Rows are stored stacked, source first, so the pooled design used by the
// density-ratio losses and the source-only design used by the imputation
// losses are both views into the same buffer. Immutable after construction.
class Dataset {
 public:
  // Validates: intercept column identically 1, labels in {0,1}, all entries
  // finite, matching column counts, both partitions non-empty.
  Dataset(RowMatrix source_x, Vector source_y, RowMatrix target_x, int q);

  int n() const { return n_; }
  int N() const { return static_cast<int>(x_.rows()) - n_; }
  int q() const { return q_; }
  int p() const { return static_cast<int>(x_.cols()) - q_; }
  int dim() const { return static_cast<int>(x_.cols()); }

  ConstRowMap pooled_x() const { return ConstRowMap(x_.data(), x_.rows(), x_.cols()); }
  ConstRowMap source_x() const { return ConstRowMap(x_.data(), n_, x_.cols()); }
  ConstRowMap target_x() const {
    return ConstRowMap(x_.data() + static_cast<Eigen::Index>(n_) * x_.cols(),
                       x_.rows() - n_, x_.cols());
  }
  const Vector& source_y() const { return y_; }

  // Risk-factor block A of every pooled row (source rows first).
  auto pooled_a() const { return pooled_x().leftCols(q_); }

 private:
  RowMatrix x_;
  Vector y_;
  int n_;
  int q_;
};

struct PopulationConstants {
  double rho_n;  // (N + n) / n
  double rho_N;  // (N + n) / N
  double rho2;   // n / N
};

PopulationConstants ComputePopulationConstants(const Dataset& d);

// Column roles for CSV ingestion. Rows with source == 1 are labeled.
struct ColumnLayout {
  std::string source_column = "s";
  std::string label_column = "y";
  std::vector<std::string> risk_columns;        // q - 1 names, intercept excluded
  std::vector<std::string> adjustment_columns;  // p names

  // Infers roles from a canonical header: columns whose name starts with 'a'
  // are risk factors, with 'w' adjustment covariates, in header order.
  static ColumnLayout Canonical(const std::vector<std::string>& header);
};

struct LoadOptions {
  // Center and scale adjustment columns by their pooled mean and sd.
  bool standardize_adjustment = true;
};

Dataset LoadDataset(const std::string& path, const ColumnLayout& layout,
                    const LoadOptions& options = {});

// Loads a canonical-format file (`s,y,a_2..a_q,w_1..w_p`).
Dataset LoadDataset(const std::string& path, const LoadOptions& options = {});

// Writes the canonical CSV format with round-trip precision; the target label
// field is left empty.
void WriteDataset(const Dataset& d, const std::string& path);

}  // namespace dramatic

#endif  // DRAMATIC_DATASET_H_
