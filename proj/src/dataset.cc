#include "dramatic/dataset.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dramatic/errors.h"

namespace dramatic {

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool ParseDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Dataset::Dataset(RowMatrix source_x, Vector source_y, RowMatrix target_x, int q)
    : n_(static_cast<int>(source_x.rows())), q_(q) {
  if (source_x.rows() < 1) throw ValidationError("empty source partition");
  if (target_x.rows() < 1) throw ValidationError("empty target partition");
  if (q < 1) throw ValidationError("q must be at least 1");
  if (source_x.cols() != target_x.cols()) {
    throw ValidationError("source and target column counts differ");
  }
  if (source_x.cols() < q) {
    throw ValidationError("fewer columns than risk factors");
  }
  if (source_y.size() != source_x.rows()) {
    throw ValidationError("label count does not match source rows");
  }
  for (Eigen::Index i = 0; i < source_y.size(); ++i) {
    if (source_y[i] != 0.0 && source_y[i] != 1.0) {
      throw ValidationError("source label outside {0,1} at source row " +
                            std::to_string(i + 1));
    }
  }
  if (!source_x.allFinite() || !target_x.allFinite()) {
    throw ValidationError("non-finite feature value");
  }
  if ((source_x.col(0).array() != 1.0).any() ||
      (target_x.col(0).array() != 1.0).any()) {
    throw ValidationError("first column must be the intercept (all ones)");
  }
  x_.resize(source_x.rows() + target_x.rows(), source_x.cols());
  x_.topRows(source_x.rows()) = source_x;
  x_.bottomRows(target_x.rows()) = target_x;
  y_ = std::move(source_y);
}

PopulationConstants ComputePopulationConstants(const Dataset& d) {
  const double n = d.n();
  const double big_n = d.N();
  return {(big_n + n) / n, (big_n + n) / big_n, n / big_n};
}

ColumnLayout ColumnLayout::Canonical(const std::vector<std::string>& header) {
  ColumnLayout layout;
  for (const auto& name : header) {
    if (name == layout.source_column || name == layout.label_column) continue;
    if (!name.empty() && name[0] == 'a') {
      layout.risk_columns.push_back(name);
    } else if (!name.empty() && name[0] == 'w') {
      layout.adjustment_columns.push_back(name);
    } else {
      throw ValidationError("unrecognized column '" + name +
                            "' in canonical layout");
    }
  }
  return layout;
}

Dataset LoadDataset(const std::string& path, const ColumnLayout& layout,
                    const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 0);
  const std::vector<std::string> header = SplitCsvLine(line);
  std::unordered_map<std::string, int> index;
  for (int k = 0; k < static_cast<int>(header.size()); ++k) index[header[k]] = k;
  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw ValidationError("column '" + name + "' not found in header");
    }
    return it->second;
  };
  const int s_col = column(layout.source_column);
  const int y_col = column(layout.label_column);
  std::vector<int> feature_cols;
  for (const auto& name : layout.risk_columns) feature_cols.push_back(column(name));
  for (const auto& name : layout.adjustment_columns) {
    feature_cols.push_back(column(name));
  }
  const int q = static_cast<int>(layout.risk_columns.size()) + 1;
  const int dim = q + static_cast<int>(layout.adjustment_columns.size());

  std::vector<double> src_vals, tgt_vals, labels;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       row);
    }
    double s;
    if (!ParseDouble(fields[s_col], &s)) {
      throw ParseError("unparsable source indicator", row);
    }
    if (s != 0.0 && s != 1.0) {
      throw ValidationError("source indicator outside {0,1} at row " +
                            std::to_string(row));
    }
    std::vector<double>& dest = (s == 1.0) ? src_vals : tgt_vals;
    dest.push_back(1.0);
    for (int c : feature_cols) {
      double v;
      if (!ParseDouble(fields[c], &v)) {
        throw ParseError("unparsable value in column '" + header[c] + "'", row);
      }
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value at row " + std::to_string(row));
      }
      dest.push_back(v);
    }
    if (s == 1.0) {
      double y;
      if (fields[y_col].empty()) {
        throw ValidationError("missing label in source row " +
                              std::to_string(row));
      }
      if (!ParseDouble(fields[y_col], &y)) {
        throw ParseError("unparsable label", row);
      }
      if (y != 0.0 && y != 1.0) {
        throw ValidationError("label outside {0,1} at row " +
                              std::to_string(row));
      }
      labels.push_back(y);
    }
  }
  if (labels.empty()) throw ValidationError("empty source partition");
  if (tgt_vals.empty()) throw ValidationError("empty target partition");

  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index big_n = static_cast<Eigen::Index>(tgt_vals.size()) / dim;
  RowMatrix sx = Eigen::Map<RowMatrix>(src_vals.data(), n, dim);
  RowMatrix tx = Eigen::Map<RowMatrix>(tgt_vals.data(), big_n, dim);
  Vector y = Eigen::Map<Vector>(labels.data(), n);

  if (options.standardize_adjustment) {
    const double total = static_cast<double>(n + big_n);
    for (int k = q; k < dim; ++k) {
      const double mean = (sx.col(k).sum() + tx.col(k).sum()) / total;
      const double ss = (sx.col(k).array() - mean).square().sum() +
                        (tx.col(k).array() - mean).square().sum();
      const double sd = total > 1 ? std::sqrt(ss / (total - 1.0)) : 0.0;
      const double scale = sd > 0.0 ? sd : 1.0;
      sx.col(k) = (sx.col(k).array() - mean) / scale;
      tx.col(k) = (tx.col(k).array() - mean) / scale;
    }
  }
  return Dataset(std::move(sx), std::move(y), std::move(tx), q);
}

Dataset LoadDataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 0);
  return LoadDataset(path, ColumnLayout::Canonical(SplitCsvLine(line)), options);
}

void WriteDataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file: " + path);
  out << "s,y";
  for (int k = 2; k <= d.q(); ++k) out << ",a_" << k;
  for (int k = 1; k <= d.p(); ++k) out << ",w_" << k;
  out << '\n';
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  const ConstRowMap sx = d.source_x();
  for (Eigen::Index i = 0; i < sx.rows(); ++i) {
    out << "1," << static_cast<int>(d.source_y()[i]);
    for (Eigen::Index k = 1; k < sx.cols(); ++k) emit(sx(i, k));
    out << '\n';
  }
  const ConstRowMap tx = d.target_x();
  for (Eigen::Index i = 0; i < tx.rows(); ++i) {
    out << "0,";
    for (Eigen::Index k = 1; k < tx.cols(); ++k) emit(tx(i, k));
    out << '\n';
  }
  if (!out) throw ValidationError("failed writing dataset file: " + path);
}

}  // namespace dramatic
