#ifndef DRAMATIC_TESTS_FIXTURES_H_
#define DRAMATIC_TESTS_FIXTURES_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "dramatic/dataset.h"
#include "dramatic/rng.h"
#include "dramatic/types.h"

namespace fixtures {

using dramatic::Dataset;
using dramatic::RowMatrix;
using dramatic::Vector;

// Scratch directory unique to a test name, emptied on creation.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dramatic_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Intercept-only dataset (q = 1, p = 0).
inline Dataset InterceptOnly(const Vector& y, int N) {
  RowMatrix xs = RowMatrix::Ones(y.size(), 1);
  RowMatrix xt = RowMatrix::Ones(N, 1);
  return Dataset(xs, y, xt, 1);
}

// Shifted Gaussian source/target with a logistic outcome in the first
// `signal` columns. Source rows are N(0, 1), target rows N(shift, 1).
inline Dataset ShiftedLogistic(int n, int N, int q, int p, double shift, std::uint64_t seed,
                               Vector* target_y = nullptr) {
  dramatic::CounterRng rng(seed);
  const int cols = q + p;
  RowMatrix xs(n, cols), xt(N, cols);
  Vector ys(n);
  if (target_y) target_y->resize(N);
  auto fill = [&](RowMatrix& x, int i, double mu) {
    x(i, 0) = 1.0;
    for (int k = 1; k < cols; ++k) x(i, k) = mu * (k <= 2) + rng.Normal();
  };
  auto label = [&](const RowMatrix& x, int i) {
    double eta = -0.3;
    for (int k = 1; k < std::min(cols, 4); ++k) eta += (k % 2 ? 0.8 : -0.6) * x(i, k);
    return rng.Bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
  };
  for (int i = 0; i < n; ++i) {
    fill(xs, i, 0.0);
    ys[i] = label(xs, i);
  }
  for (int i = 0; i < N; ++i) {
    fill(xt, i, shift);
    const double yi = label(xt, i);
    if (target_y) (*target_y)[i] = yi;
  }
  return Dataset(xs, ys, xt, q);
}

}  // namespace fixtures

#endif  // DRAMATIC_TESTS_FIXTURES_H_
