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

// Reference implementations shared by the unit tests and the acceptance
// runner. Each one is written directly from the definition and shares no
// code with the library beyond plain data types.

#ifndef TIMIX_TESTS_ORACLES_HPP_
#define TIMIX_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

/// Patch (r, c) is labelled iff its pixel square and the box overlap with positive area.
inline std::vector<std::uint8_t> box_labels(int height, int width, int patch, int x0, int y0, int x1, int y1) {
  const int rows = height / patch, cols = width / patch;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(rows * cols), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const long long ix = std::min(x1, (c + 1) * patch) - std::max(x0, c * patch);
      const long long iy = std::min(y1, (r + 1) * patch) - std::max(y0, r * patch);
      if (ix > 0 && iy > 0) out[static_cast<std::size_t>(r * cols + c)] = 1;
    }
  }
  return out;
}

inline long double window_sum(const std::vector<double>& scores, int cols, int r, int c, int h, int w) {
  long double s = 0.0L;
  for (int i = r; i < r + h; ++i) {
    for (int j = c; j < c + w; ++j) s += scores[static_cast<std::size_t>(i * cols + j)];
  }
  return s;
}

/// Exhaustive argmin / argmax over all window positions; the first position in row-major order wins ties.
inline std::pair<int, int> extreme_window(const std::vector<double>& scores, int rows, int cols, int h, int w,
                                          bool maximize) {
  std::pair<int, int> best{0, 0};
  long double best_v = window_sum(scores, cols, 0, 0, h, w);
  for (int r = 0; r + h <= rows; ++r) {
    for (int c = 0; c + w <= cols; ++c) {
      const long double v = window_sum(scores, cols, r, c, h, w);
      if (maximize ? v > best_v : v < best_v) {
        best_v = v;
        best = {r, c};
      }
    }
  }
  return best;
}

inline double soft_label_source(int height, int width, int patch, double gamma) {
  const int rows = height / patch, cols = width / patch;
  const long long h = static_cast<long long>(std::floor(gamma * rows));
  const long long w = static_cast<long long>(std::floor(gamma * cols));
  return static_cast<double>(h * w * patch * patch) / static_cast<double>(static_cast<long long>(height) * width);
}

/**
 * One anchor's weighted loss: -sum_p w_p log(exp(l_p) / sum_k exp(l_k)),
 * summed over the full candidate set in long double.
 */
inline double weighted_anchor_loss(const std::vector<double>& anchor, const std::vector<std::vector<double>>& cands,
                                   const std::vector<std::pair<std::size_t, double>>& positives, double tau,
                                   bool cosine) {
  auto logit = [&](const std::vector<double>& t) {
    long double d = 0.0L, na = 0.0L, nt = 0.0L;
    for (std::size_t j = 0; j < anchor.size(); ++j) {
      d += static_cast<long double>(anchor[j]) * t[j];
      na += static_cast<long double>(anchor[j]) * anchor[j];
      nt += static_cast<long double>(t[j]) * t[j];
    }
    if (cosine) d /= std::sqrt(na) * std::sqrt(nt);
    return d / tau;
  };
  long double denom = 0.0L;
  for (const auto& t : cands) denom += std::exp(logit(t));
  long double loss = 0.0L;
  for (const auto& [k, w] : positives) loss -= w * (logit(cands[k]) - std::log(denom));
  return static_cast<double>(loss);
}

/// I(T; V) = sum p log(p / (p_t p_v)) over a row-major T x V table.
inline double mutual_information(const std::vector<double>& p, int t_size, int v_size) {
  std::vector<long double> pt(static_cast<std::size_t>(t_size), 0.0L), pv(static_cast<std::size_t>(v_size), 0.0L);
  for (int t = 0; t < t_size; ++t) {
    for (int v = 0; v < v_size; ++v) {
      pt[t] += p[static_cast<std::size_t>(t * v_size + v)];
      pv[v] += p[static_cast<std::size_t>(t * v_size + v)];
    }
  }
  long double s = 0.0L;
  for (int t = 0; t < t_size; ++t) {
    for (int v = 0; v < v_size; ++v) {
      const long double q = p[static_cast<std::size_t>(t * v_size + v)];
      if (q > 0) s += q * std::log(q / (pt[t] * pv[v]));
    }
  }
  return static_cast<double>(s);
}

/**
 * Expected InfoNCE with the optimal critic p(t|v)/p(t): enumerates the
 * positive pair and every ordered tuple of N-1 negatives drawn from p(t).
 */
inline double expected_infonce(const std::vector<double>& p, int t_size, int v_size, int n) {
  std::vector<long double> pt(static_cast<std::size_t>(t_size), 0.0L), pv(static_cast<std::size_t>(v_size), 0.0L);
  for (int t = 0; t < t_size; ++t) {
    for (int v = 0; v < v_size; ++v) {
      pt[t] += p[static_cast<std::size_t>(t * v_size + v)];
      pv[v] += p[static_cast<std::size_t>(t * v_size + v)];
    }
  }
  auto critic = [&](int t, int v) { return p[static_cast<std::size_t>(t * v_size + v)] / (pt[t] * pv[v]); };
  long double total = 0.0L;
  std::vector<int> neg(static_cast<std::size_t>(n - 1), 0);
  for (int t1 = 0; t1 < t_size; ++t1) {
    for (int v = 0; v < v_size; ++v) {
      const long double q = p[static_cast<std::size_t>(t1 * v_size + v)];
      if (q <= 0) continue;
      std::fill(neg.begin(), neg.end(), 0);
      while (true) {
        long double w = q, denom = critic(t1, v);
        for (int k : neg) {
          w *= pt[k];
          denom += critic(k, v);
        }
        total += w * -std::log(critic(t1, v) / denom);
        std::size_t i = 0;
        while (i < neg.size() && ++neg[i] == t_size) neg[i++] = 0;
        if (i == neg.size()) break;
      }
    }
  }
  return static_cast<double>(total);
}

/// Central differences of f at x with step h.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  long double d = 0.0L, na = 0.0L, nb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  const long double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0.0L ? 0.0 : static_cast<double>(std::sqrt(d) / scale);
}

}  // namespace oracle

#endif  // TIMIX_TESTS_ORACLES_HPP_
