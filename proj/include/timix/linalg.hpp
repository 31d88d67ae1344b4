/**
 * Copyright 2026 The timix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TIMIX_LINALG_HPP_
#define TIMIX_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "timix/error.hpp"

namespace timix {

/// Real feature vector; dimension fixed per model instance.
using Embedding = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(ErrorKind::DimensionMismatch, "dot of vectors with different sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// Row-major dense matrix used for the small linear maps in this library.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  /// y = M x
  Embedding apply(std::span<const double> x) const {
    if (x.size() != cols) raise(ErrorKind::DimensionMismatch, "matrix-vector size mismatch");
    Embedding y(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* m = data.data() + r * cols;
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += m[c] * x[c];
      y[r] = s;
    }
    return y;
  }

  /// this += alpha * g x^T
  void add_outer(double alpha, std::span<const double> g, std::span<const double> x) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = alpha * g[r];
      if (a == 0.0) continue;
      double* m = data.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) m[c] += a * x[c];
    }
  }

  bool operator==(const Matrix&) const = default;
};

/// Compensated (Neumaier) running sum; order-insensitive to first order.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace timix

#endif  // TIMIX_LINALG_HPP_
