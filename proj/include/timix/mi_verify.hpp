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

#ifndef TIMIX_MI_VERIFY_HPP_
#define TIMIX_MI_VERIFY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "timix/error.hpp"
#include "timix/linalg.hpp"
#include "timix/rng.hpp"

namespace timix {

// All information quantities are in nats.

inline constexpr double kJointSumTolerance = 1e-12;
inline constexpr double kEnumeratedEpsilon = 1e-9;
inline constexpr double kChainRuleTolerance = 1e-10;

/// Joint distribution P(T, V) over finite alphabets, stored [t][v] row-major.
class DiscreteJoint {
 public:
  DiscreteJoint(int t_size, int v_size, std::vector<double> probs)
      : t_size_(t_size), v_size_(v_size), probs_(std::move(probs)) {
    if (t_size < 1 || v_size < 1) raise(ErrorKind::InvalidArgument, "alphabets must be non-empty");
    if (probs_.size() != static_cast<std::size_t>(t_size) * v_size) {
      raise(ErrorKind::LengthMismatch, "joint table size does not match alphabets");
    }
    KahanSum total;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) raise(ErrorKind::InvalidArgument, "probabilities must be finite and >= 0");
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > kJointSumTolerance) {
      raise(ErrorKind::InvalidArgument, "joint sums to " + std::to_string(total.value()));
    }
    pt_.assign(static_cast<std::size_t>(t_size), 0.0);
    pv_.assign(static_cast<std::size_t>(v_size), 0.0);
    for (int t = 0; t < t_size; ++t) {
      for (int v = 0; v < v_size; ++v) {
        pt_[t] += (*this)(t, v);
        pv_[v] += (*this)(t, v);
      }
    }
    for (double p : pt_) {
      if (!(p > 0.0)) raise(ErrorKind::DegenerateMarginal, "text symbol with zero probability");
    }
    for (double p : pv_) {
      if (!(p > 0.0)) raise(ErrorKind::DegenerateMarginal, "image symbol with zero probability");
    }
  }

  int t_size() const noexcept { return t_size_; }
  int v_size() const noexcept { return v_size_; }
  double operator()(int t, int v) const { return probs_[static_cast<std::size_t>(t) * v_size_ + v]; }
  double p_t(int t) const { return pt_[t]; }
  double p_v(int v) const { return pv_[v]; }
  const std::vector<double>& probs() const { return probs_; }

  /// Critic value P(t | v) / P(t).
  double density_ratio(int t, int v) const { return (*this)(t, v) / (pt_[t] * pv_[v]); }

  /// Joint with zero-probability image symbols removed (used for composite images).
  static DiscreteJoint compact(int t_size, int v_size, const std::vector<double>& probs) {
    std::vector<int> keep;
    for (int v = 0; v < v_size; ++v) {
      double s = 0.0;
      for (int t = 0; t < t_size; ++t) s += probs[static_cast<std::size_t>(t) * v_size + v];
      if (s > 0.0) keep.push_back(v);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t_size) * keep.size());
    for (int t = 0; t < t_size; ++t) {
      for (int v : keep) out.push_back(probs[static_cast<std::size_t>(t) * v_size + v]);
    }
    return DiscreteJoint(t_size, static_cast<int>(keep.size()), std::move(out));
  }

 private:
  int t_size_;
  int v_size_;
  std::vector<double> probs_;
  std::vector<double> pt_;
  std::vector<double> pv_;
};

/// I(T; V) = sum p(t,v) log[p(t,v) / (p(t) p(v))].
inline double exact_mi(const DiscreteJoint& joint) {
  KahanSum s;
  for (int t = 0; t < joint.t_size(); ++t) {
    for (int v = 0; v < joint.v_size(); ++v) {
      const double p = joint(t, v);
      if (p > 0.0) s.add(p * std::log(p / (joint.p_t(t) * joint.p_v(v))));
    }
  }
  return std::max(0.0, s.value());
}

// ---------------------------------------------------------------------------
// Expected InfoNCE with the density-ratio critic.

struct EnumerationLimits {
  int max_text_alphabet = 8;
  int max_image_alphabet = 64;
  int max_batch = 8;
};

struct MonteCarloOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 1'000'000;
};

inline constexpr std::size_t kMinMonteCarloSamples = 1'000'000;

struct ExpectedLoss {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
  std::size_t samples = 0;
};

namespace detail {

/**
 * Exact expectation over (t1, v) ~ P and N-1 i.i.d. negatives ~ P(t). The
 * negatives only enter through their multiset, so we enumerate compositions
 * of N-1 over the text alphabet with multinomial weights.
 */
inline double enumerate_infonce(const DiscreteJoint& j, int n) {
  const int T = j.t_size();
  const int V = j.v_size();
  const int negatives = n - 1;
  std::vector<double> log_pt(T);
  for (int t = 0; t < T; ++t) log_pt[t] = std::log(j.p_t(t));
  std::vector<double> ratio(static_cast<std::size_t>(T) * V);
  for (int t = 0; t < T; ++t) {
    for (int v = 0; v < V; ++v) ratio[static_cast<std::size_t>(t) * V + v] = j.density_ratio(t, v);
  }
  const double log_fact_neg = std::lgamma(static_cast<double>(negatives) + 1.0);

  KahanSum total;
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(T) + 1, std::vector<double>(V, 0.0));

  std::function<void(int, int, double)> recurse = [&](int t, int remaining, double log_w) {
    if (t == T - 1) {
      const int c = remaining;
      const double lw = log_w + c * log_pt[t] - std::lgamma(c + 1.0);
      const double prob = std::exp(log_fact_neg + lw);
      for (int v = 0; v < V; ++v) {
        const double s = sums[t][v] + c * ratio[static_cast<std::size_t>(t) * V + v];
        double acc = 0.0;
        for (int t1 = 0; t1 < T; ++t1) {
          const double p = j(t1, v);
          if (p > 0.0) acc += p * std::log1p(s / ratio[static_cast<std::size_t>(t1) * V + v]);
        }
        total.add(prob * acc);
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      for (int v = 0; v < V; ++v) sums[t + 1][v] = sums[t][v] + c * ratio[static_cast<std::size_t>(t) * V + v];
      recurse(t + 1, remaining - c, log_w + c * log_pt[t] - std::lgamma(c + 1.0));
    }
  };
  recurse(0, negatives, 0.0);
  return total.value();
}

inline ExpectedLoss monte_carlo_infonce(const DiscreteJoint& j, int n, const MonteCarloOptions& mc) {
  const int T = j.t_size();
  const int V = j.v_size();
  std::vector<double> pv(V), pt(T);
  for (int v = 0; v < V; ++v) pv[v] = j.p_v(v);
  for (int t = 0; t < T; ++t) pt[t] = j.p_t(t);
  std::discrete_distribution<int> draw_v(pv.begin(), pv.end());
  std::discrete_distribution<int> draw_t(pt.begin(), pt.end());
  std::vector<std::discrete_distribution<int>> draw_t_given_v;
  for (int v = 0; v < V; ++v) {
    std::vector<double> col(T);
    for (int t = 0; t < T; ++t) col[t] = j(t, v);
    draw_t_given_v.emplace_back(col.begin(), col.end());
  }
  std::mt19937_64 eng(mc.seed);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < mc.samples; ++s) {
    const int v = draw_v(eng);
    const int t1 = draw_t_given_v[v](eng);
    double neg = 0.0;
    for (int k = 1; k < n; ++k) neg += j.density_ratio(draw_t(eng), v);
    const double x = std::log1p(neg / j.density_ratio(t1, v));
    const double delta = x - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (x - mean);
  }
  const double var = mc.samples > 1 ? m2 / static_cast<double>(mc.samples - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(mc.samples)), false, mc.samples};
}

}  // namespace detail

inline bool enumerable(const DiscreteJoint& j, int n, const EnumerationLimits& lim = {}) {
  return j.t_size() <= lim.max_text_alphabet && j.v_size() <= lim.max_image_alphabet && n <= lim.max_batch;
}

/**
 * E[-log(r(t1,v) / (r(t1,v) + sum_k r(t_k,v)))] with r = P(t|v)/P(t) and N-1
 * negatives drawn from P(t). Exact when the problem is small enough;
 * otherwise Monte Carlo, which needs explicit options.
 */
inline ExpectedLoss expected_infonce(const DiscreteJoint& joint, int n,
                                     const std::optional<MonteCarloOptions>& mc = std::nullopt,
                                     const EnumerationLimits& lim = {}) {
  if (n < 1) raise(ErrorKind::InvalidArgument, "batch size must be at least 1");
  if (n == 1) return {0.0, 0.0, true, 0};
  if (enumerable(joint, n, lim)) return {detail::enumerate_infonce(joint, n), 0.0, true, 0};
  if (!mc) {
    raise(ErrorKind::AlphabetTooLarge, "problem too large to enumerate; Monte Carlo needs a seed and sample count");
  }
  if (mc->samples < kMinMonteCarloSamples) {
    raise(ErrorKind::InvalidArgument, "Monte Carlo needs at least 1e6 samples");
  }
  return detail::monte_carlo_infonce(joint, n, *mc);
}

/// Forces the Monte Carlo estimator regardless of size (cross-checks).
inline ExpectedLoss expected_infonce_mc(const DiscreteJoint& joint, int n, const MonteCarloOptions& mc) {
  if (n < 1) raise(ErrorKind::InvalidArgument, "batch size must be at least 1");
  return detail::monte_carlo_infonce(joint, n, mc);
}

/// Tolerance for a bound verdict: fixed for exact losses, 3 standard errors otherwise.
inline double bound_tolerance(const ExpectedLoss& l) { return l.exact ? kEnumeratedEpsilon : 3.0 * l.std_error; }

struct VanillaBoundReport {
  int n = 0;
  double mi = 0.0;
  double loss = 0.0;
  double lhs = 0.0;     ///< I(T; V)
  double rhs = 0.0;     ///< log N - L
  double margin = 0.0;  ///< lhs - rhs
  double tolerance = 0.0;
  bool bound_ok = false;
  bool tight = false;   ///< |margin| <= tolerance
};

/// Checks I(T; V) >= log N - L.
inline VanillaBoundReport verify_vanilla_bound(const DiscreteJoint& joint, int n,
                                               const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  const auto loss = expected_infonce(joint, n, mc);
  VanillaBoundReport r;
  r.n = n;
  r.mi = exact_mi(joint);
  r.loss = loss.value;
  r.lhs = r.mi;
  r.rhs = std::log(static_cast<double>(n)) - loss.value;
  r.margin = r.lhs - r.rhs;
  r.tolerance = bound_tolerance(loss);
  r.bound_ok = r.margin >= -r.tolerance;
  r.tight = std::abs(r.margin) <= r.tolerance;
  return r;
}

/**
 * E[log(1 + (N-1) P(t)/P(t|v))], the value obtained by replacing the
 * negatives' sum with N-1 times its expectation. Reported, not asserted.
 */
inline double approximated_infonce(const DiscreteJoint& j, int n) {
  KahanSum s;
  for (int t = 0; t < j.t_size(); ++t) {
    for (int v = 0; v < j.v_size(); ++v) {
      const double p = j(t, v);
      if (p > 0.0) s.add(p * std::log1p((n - 1) / j.density_ratio(t, v)));
    }
  }
  return s.value();
}

// ---------------------------------------------------------------------------
// Mixed-image joints: captions (tx, ty) and the two composed regions (rx, ry).

/// Joint over (tx, ty, rx, ry), stored [tx][ty][rx][ry], with soft labels s_x + s_y = 1.
class FactoredJoint {
 public:
  FactoredJoint(std::array<int, 4> sizes, std::vector<double> probs, double s_x)
      : sizes_(sizes), probs_(std::move(probs)), s_x_(s_x) {
    for (int s : sizes_) {
      if (s < 1) raise(ErrorKind::InvalidArgument, "alphabets must be non-empty");
    }
    if (probs_.size() != static_cast<std::size_t>(sizes_[0]) * sizes_[1] * sizes_[2] * sizes_[3]) {
      raise(ErrorKind::LengthMismatch, "factored table size does not match alphabets");
    }
    if (!(s_x >= 0.0 && s_x <= 1.0)) raise(ErrorKind::WeightSumViolation, "s_x must lie in [0, 1]");
    KahanSum total;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) raise(ErrorKind::InvalidArgument, "probabilities must be finite and >= 0");
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > kJointSumTolerance) raise(ErrorKind::InvalidArgument, "joint must sum to 1");
  }

  /**
   * Captions depend on the mix only through their own region:
   * P = P(rx, ry) P(tx | rx) P(ty | ry).
   */
  static FactoredJoint markov(const std::vector<double>& p_regions, int rx_size, int ry_size,
                              const std::vector<double>& tx_given_rx, int tx_size,
                              const std::vector<double>& ty_given_ry, int ty_size, double s_x) {
    std::vector<double> probs(static_cast<std::size_t>(tx_size) * ty_size * rx_size * ry_size, 0.0);
    std::size_t idx = 0;
    for (int tx = 0; tx < tx_size; ++tx) {
      for (int ty = 0; ty < ty_size; ++ty) {
        for (int rx = 0; rx < rx_size; ++rx) {
          for (int ry = 0; ry < ry_size; ++ry) {
            probs[idx++] = p_regions[static_cast<std::size_t>(rx) * ry_size + ry] *
                           tx_given_rx[static_cast<std::size_t>(rx) * tx_size + tx] *
                           ty_given_ry[static_cast<std::size_t>(ry) * ty_size + ty];
          }
        }
      }
    }
    return FactoredJoint({tx_size, ty_size, rx_size, ry_size}, std::move(probs), s_x);
  }

  /// (tx, rx) ~ px and (ty, ry) ~ py independently; px is [tx][rx], py is [ty][ry].
  static FactoredJoint independent(const DiscreteJoint& px, const DiscreteJoint& py, double s_x) {
    const int a = px.t_size(), b = py.t_size(), c = px.v_size(), d = py.v_size();
    std::vector<double> probs(static_cast<std::size_t>(a) * b * c * d);
    std::size_t idx = 0;
    for (int tx = 0; tx < a; ++tx) {
      for (int ty = 0; ty < b; ++ty) {
        for (int rx = 0; rx < c; ++rx) {
          for (int ry = 0; ry < d; ++ry) probs[idx++] = px(tx, rx) * py(ty, ry);
        }
      }
    }
    return FactoredJoint({a, b, c, d}, std::move(probs), s_x);
  }

  int tx_size() const noexcept { return sizes_[0]; }
  int ty_size() const noexcept { return sizes_[1]; }
  int rx_size() const noexcept { return sizes_[2]; }
  int ry_size() const noexcept { return sizes_[3]; }
  double s_x() const noexcept { return s_x_; }
  double s_y() const noexcept { return 1.0 - s_x_; }

  double operator()(int tx, int ty, int rx, int ry) const {
    return probs_[((static_cast<std::size_t>(tx) * sizes_[1] + ty) * sizes_[2] + rx) * sizes_[3] + ry];
  }

  enum Var { TX = 0, TY = 1, RX = 2, RY = 3 };

  /// Marginal table over the listed variables, mixed-radix in list order.
  std::vector<double> marginal(const std::vector<Var>& vars) const {
    std::size_t size = 1;
    for (Var v : vars) size *= static_cast<std::size_t>(sizes_[v]);
    std::vector<double> out(size, 0.0);
    std::array<int, 4> idx{};
    for (idx[0] = 0; idx[0] < sizes_[0]; ++idx[0]) {
      for (idx[1] = 0; idx[1] < sizes_[1]; ++idx[1]) {
        for (idx[2] = 0; idx[2] < sizes_[2]; ++idx[2]) {
          for (idx[3] = 0; idx[3] < sizes_[3]; ++idx[3]) {
            std::size_t k = 0;
            for (Var v : vars) k = k * static_cast<std::size_t>(sizes_[v]) + idx[v];
            out[k] += (*this)(idx[0], idx[1], idx[2], idx[3]);
          }
        }
      }
    }
    return out;
  }

  int size_of(const std::vector<Var>& vars) const {
    int s = 1;
    for (Var v : vars) s *= sizes_[v];
    return s;
  }

  /// Joint of `a` against the composite of `b`, zero-probability composites dropped.
  DiscreteJoint pair(Var a, const std::vector<Var>& b) const {
    std::vector<Var> vars{a};
    vars.insert(vars.end(), b.begin(), b.end());
    return DiscreteJoint::compact(sizes_[a], size_of(b), marginal(vars));
  }

  /// I(a; b) over composite variables; zero-probability symbols contribute nothing.
  double mi(const std::vector<Var>& a, const std::vector<Var>& b) const {
    std::vector<Var> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto pab = marginal(ab);
    const auto pa = marginal(a);
    const auto pb = marginal(b);
    const auto nb = pb.size();
    KahanSum s;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t k = 0; k < nb; ++k) {
        const double p = pab[i * nb + k];
        if (p > 0.0) s.add(p * std::log(p / (pa[i] * pb[k])));
      }
    }
    return std::max(0.0, s.value());
  }

  /// I(a; b | c) = sum p(a,b,c) log[p(a,b,c) p(c) / (p(a,c) p(b,c))].
  double conditional_mi(Var a, Var b, Var c) const {
    const auto pabc = marginal({a, b, c});
    const auto pac = marginal({a, c});
    const auto pbc = marginal({b, c});
    const auto pc = marginal({c});
    const int nb = sizes_[b], nc = sizes_[c];
    KahanSum s;
    for (int i = 0; i < sizes_[a]; ++i) {
      for (int k = 0; k < nb; ++k) {
        for (int l = 0; l < nc; ++l) {
          const double p = pabc[(static_cast<std::size_t>(i) * nb + k) * nc + l];
          if (p > 0.0) {
            s.add(p * std::log(p * pc[l] / (pac[static_cast<std::size_t>(i) * nc + l] * pbc[static_cast<std::size_t>(k) * nc + l])));
          }
        }
      }
    }
    return std::max(0.0, s.value());
  }

 private:
  std::array<int, 4> sizes_;
  std::vector<double> probs_;
  double s_x_;
};

/// One named inequality lhs >= rhs, evaluated with a tolerance.
struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  double margin() const { return lhs - rhs; }
  bool holds() const { return margin() >= -tolerance; }
};

enum class OverlapCase { Equality, Strict, Violated };

inline std::string to_string(OverlapCase c) {
  switch (c) {
    case OverlapCase::Equality: return "equality";
    case OverlapCase::Strict: return "strict";
    case OverlapCase::Violated: return "violated";
  }
  return "unknown";
}

/// Chain-rule decomposition for one caption against the two regions.
struct ChainRuleSide {
  double mi_joint = 0.0;        ///< I(t; (rx, ry))
  double mi_own = 0.0;          ///< I(t; own region)
  double mi_other = 0.0;        ///< I(t; other region)
  double mi_other_given_own = 0.0;
  double identity_error = 0.0;  ///< |I(t;(rx,ry)) - I(t;own) - I(t;other|own)|
  OverlapCase overlap = OverlapCase::Equality;
};

struct ChainRuleReport {
  ChainRuleSide x;
  ChainRuleSide y;
  double region_mi = 0.0;  ///< I(rx; ry)
  bool identity_ok = false;
};

namespace detail {

inline ChainRuleSide chain_side(const FactoredJoint& fj, FactoredJoint::Var t, FactoredJoint::Var own,
                                FactoredJoint::Var other) {
  ChainRuleSide s;
  s.mi_joint = fj.mi({t}, {FactoredJoint::RX, FactoredJoint::RY});
  s.mi_own = fj.mi({t}, {own});
  s.mi_other = fj.mi({t}, {other});
  s.mi_other_given_own = fj.conditional_mi(t, other, own);
  s.identity_error = std::abs(s.mi_joint - s.mi_own - s.mi_other_given_own);
  const double gap = s.mi_own + s.mi_other - s.mi_joint;
  s.overlap = gap > kChainRuleTolerance    ? OverlapCase::Strict
              : gap >= -kChainRuleTolerance ? OverlapCase::Equality
                                            : OverlapCase::Violated;
  return s;
}

}  // namespace detail

/**
 * I(t; (rx, ry)) = I(t; own) + I(t; other | own) for both captions, plus the
 * comparison of I(t; own) + I(t; other) against I(t; (rx, ry)).
 */
inline ChainRuleReport chain_rule_check(const FactoredJoint& fj) {
  ChainRuleReport r;
  r.x = detail::chain_side(fj, FactoredJoint::TX, FactoredJoint::RX, FactoredJoint::RY);
  r.y = detail::chain_side(fj, FactoredJoint::TY, FactoredJoint::RY, FactoredJoint::RX);
  r.region_mi = fj.mi({FactoredJoint::RX}, {FactoredJoint::RY});
  r.identity_ok = r.x.identity_error <= kChainRuleTolerance && r.y.identity_error <= kChainRuleTolerance;
  return r;
}

struct TimixBoundReport {
  int n = 0;
  double s_x = 0.0;
  double s_y = 0.0;
  double i_x_rx = 0.0;   ///< I(tx; rx)
  double i_y_ry = 0.0;   ///< I(ty; ry)
  double i_x_ry = 0.0;   ///< I(tx; ry)
  double i_y_rx = 0.0;   ///< I(ty; rx)
  double i_x_mix = 0.0;  ///< I(tx; (rx, ry))
  double i_y_mix = 0.0;  ///< I(ty; (rx, ry))
  double loss_x = 0.0;
  double loss_y = 0.0;
  double loss = 0.0;     ///< s_x loss_x + s_y loss_y
  double approximation_gap = 0.0;
  /// Final bound: s_x I(tx;rx) + s_y I(ty;ry) >= log N - (L + s_x I(tx;ry) + s_y I(ty;rx)).
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  std::vector<InequalityCheck> checks;
  ChainRuleReport chain;
  bool bound_ok = false;

  const InequalityCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

/**
 * Evaluates the mixed-sample bound chain on an exactly known joint:
 *
 *   mixed_bound      s_x I(tx;mix) + s_y I(ty;mix) >= log N - L
 *   overlap_x        I(tx;rx) + I(tx;ry) >= I(tx;mix)
 *   overlap_y        I(ty;rx) + I(ty;ry) >= I(ty;mix)
 *   combined_bound   s_x (I(tx;rx)+I(tx;ry)) + s_y (I(ty;rx)+I(ty;ry)) >= log N - L
 *   regularized_bound  s_x I(tx;rx) + s_y I(ty;ry) >= log N - (L + s_x I(tx;ry) + s_y I(ty;rx))
 *
 * Each loss term is the expected InfoNCE of its caption against the composite
 * image with critic P(t|mix)/P(t) and N-1 marginal negatives.
 */
inline TimixBoundReport verify_timix_bound(const FactoredJoint& fj, int n,
                                           const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  using V = FactoredJoint;
  TimixBoundReport r;
  r.n = n;
  r.s_x = fj.s_x();
  r.s_y = fj.s_y();
  r.i_x_rx = fj.mi({V::TX}, {V::RX});
  r.i_y_ry = fj.mi({V::TY}, {V::RY});
  r.i_x_ry = fj.mi({V::TX}, {V::RY});
  r.i_y_rx = fj.mi({V::TY}, {V::RX});
  r.i_x_mix = fj.mi({V::TX}, {V::RX, V::RY});
  r.i_y_mix = fj.mi({V::TY}, {V::RX, V::RY});

  const auto jx = fj.pair(V::TX, {V::RX, V::RY});
  const auto jy = fj.pair(V::TY, {V::RX, V::RY});
  std::optional<MonteCarloOptions> mc_y = mc;
  if (mc_y) mc_y->seed = derive_seed(mc->seed, 1);
  const auto lx = expected_infonce(jx, n, mc);
  const auto ly = expected_infonce(jy, n, mc_y);
  r.loss_x = lx.value;
  r.loss_y = ly.value;
  r.loss = r.s_x * lx.value + r.s_y * ly.value;
  r.approximation_gap =
      r.s_x * (approximated_infonce(jx, n) - lx.value) + r.s_y * (approximated_infonce(jy, n) - ly.value);

  const double log_n = std::log(static_cast<double>(n));
  const double tol = std::max(bound_tolerance(lx), bound_tolerance(ly));
  r.checks.push_back({"mixed_bound", r.s_x * r.i_x_mix + r.s_y * r.i_y_mix, (r.s_x + r.s_y) * log_n - r.loss, tol});
  r.checks.push_back({"overlap_x", r.i_x_rx + r.i_x_ry, r.i_x_mix, kChainRuleTolerance});
  r.checks.push_back({"overlap_y", r.i_y_rx + r.i_y_ry, r.i_y_mix, kChainRuleTolerance});
  r.checks.push_back(
      {"combined_bound", r.s_x * (r.i_x_rx + r.i_x_ry) + r.s_y * (r.i_y_rx + r.i_y_ry), log_n - r.loss, tol});
  r.lhs = r.s_x * r.i_x_rx + r.s_y * r.i_y_ry;
  r.rhs = log_n - (r.loss + r.s_x * r.i_x_ry + r.s_y * r.i_y_rx);
  r.margin = r.lhs - r.rhs;
  r.checks.push_back({"regularized_bound", r.lhs, r.rhs, tol});
  r.chain = chain_rule_check(fj);
  r.bound_ok = r.checks.back().holds();
  return r;
}

// ---------------------------------------------------------------------------
// Random instances and the fuzzing harness.

/// Flat Dirichlet(alpha) draw of length n (strictly positive entries).
inline std::vector<double> random_simplex(Rng& rng, int n, double alpha = 1.0) {
  std::vector<double> x(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& v : x) {
    v = std::max(std::gamma_distribution<double>(alpha, 1.0)(rng.engine()), 1e-12);
    s += v;
  }
  for (auto& v : x) v /= s;
  return x;
}

inline DiscreteJoint random_joint(Rng& rng, int t_size, int v_size, double alpha = 1.0) {
  return DiscreteJoint(t_size, v_size, random_simplex(rng, t_size * v_size, alpha));
}

inline DiscreteJoint random_product_joint(Rng& rng, int t_size, int v_size) {
  const auto pt = random_simplex(rng, t_size);
  const auto pv = random_simplex(rng, v_size);
  std::vector<double> p(static_cast<std::size_t>(t_size) * v_size);
  for (int t = 0; t < t_size; ++t) {
    for (int v = 0; v < v_size; ++v) p[static_cast<std::size_t>(t) * v_size + v] = pt[t] * pv[v];
  }
  // Renormalize away the last-ulp drift of the outer product.
  double s = 0.0;
  for (double x : p) s += x;
  for (double& x : p) x /= s;
  return DiscreteJoint(t_size, v_size, std::move(p));
}

/**
 * Random Markov-structured mixed joint: regions drawn from a mixture of an
 * independent and a coupled table, captions from random region channels.
 */
inline FactoredJoint random_factored_joint(Rng& rng, int max_alphabet, double s_x) {
  auto size = [&] { return static_cast<int>(rng.integer(2, std::max(2, max_alphabet))); };
  const int tx = size(), ty = size(), rx = size(), ry = size();
  const auto px = random_simplex(rng, rx);
  const auto py = random_simplex(rng, ry);
  const auto coupled = random_simplex(rng, rx * ry, 0.3);
  const double lambda = rng.uniform01();
  std::vector<double> regions(static_cast<std::size_t>(rx) * ry);
  for (int a = 0; a < rx; ++a) {
    for (int b = 0; b < ry; ++b) {
      const auto k = static_cast<std::size_t>(a) * ry + b;
      regions[k] = (1.0 - lambda) * px[a] * py[b] + lambda * coupled[k];
    }
  }
  std::vector<double> cx, cy;
  for (int a = 0; a < rx; ++a) {
    const auto row = random_simplex(rng, tx, 0.5);
    cx.insert(cx.end(), row.begin(), row.end());
  }
  for (int b = 0; b < ry; ++b) {
    const auto row = random_simplex(rng, ty, 0.5);
    cy.insert(cy.end(), row.begin(), row.end());
  }
  return FactoredJoint::markov(regions, rx, ry, cx, tx, cy, ty, s_x);
}

inline constexpr std::array<int, 3> kFuzzBatchSizes{2, 4, 8};
inline constexpr std::array<double, 3> kFuzzSoftLabels{0.25, 0.5, 0.75};

/// One CSV row of the fuzzing harness.
struct MiTrialRow {
  int trial = 0;
  int n = 0;
  double s_x = 0.0;
  double i_x_rx = 0.0, i_y_ry = 0.0, i_x_ry = 0.0, i_y_rx = 0.0;
  double loss = 0.0;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;
  bool ok = false;
};

struct MiFuzzOptions {
  int trials = 10;
  std::uint64_t seed = 0;
  int max_alphabet = 4;
  int threads = 1;
  bool vanilla = false;
};

/// Runs one trial; seeds come from (master seed, trial) so scheduling cannot change results.
inline MiTrialRow run_mi_trial(const MiFuzzOptions& opt, int trial) {
  Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(trial)));
  const int n = kFuzzBatchSizes[static_cast<std::size_t>(rng.integer(0, 2))];
  const EnumerationLimits lim;
  MonteCarloOptions mc{derive_seed(opt.seed, 1'000'000ULL + static_cast<std::uint64_t>(trial)), kMinMonteCarloSamples};
  MiTrialRow row;
  row.trial = trial;
  row.n = n;
  if (opt.vanilla) {
    const int t = static_cast<int>(rng.integer(2, std::max(2, opt.max_alphabet)));
    const int v = static_cast<int>(rng.integer(2, std::max(2, opt.max_alphabet)));
    const auto j = random_joint(rng, t, v);
    const auto r = verify_vanilla_bound(j, n, enumerable(j, n, lim) ? std::nullopt : std::optional(mc));
    row.s_x = 1.0;
    row.i_x_rx = r.mi;
    row.loss = r.loss;
    row.lhs = r.lhs;
    row.rhs = r.rhs;
    row.margin = r.margin;
    row.ok = r.bound_ok;
    return row;
  }
  const double s_x = kFuzzSoftLabels[static_cast<std::size_t>(rng.integer(0, 2))];
  const auto fj = random_factored_joint(rng, opt.max_alphabet, s_x);
  const bool exact = fj.tx_size() <= lim.max_text_alphabet && fj.ty_size() <= lim.max_text_alphabet &&
                     fj.rx_size() * fj.ry_size() <= lim.max_image_alphabet;
  const auto r = verify_timix_bound(fj, n, exact ? std::nullopt : std::optional(mc));
  row.s_x = s_x;
  row.i_x_rx = r.i_x_rx;
  row.i_y_ry = r.i_y_ry;
  row.i_x_ry = r.i_x_ry;
  row.i_y_rx = r.i_y_rx;
  row.loss = r.loss;
  row.lhs = r.lhs;
  row.rhs = r.rhs;
  row.margin = r.margin;
  row.ok = r.bound_ok && r.chain.identity_ok;
  return row;
}

inline std::vector<MiTrialRow> run_mi_fuzz(const MiFuzzOptions& opt) {
  if (opt.trials < 0) raise(ErrorKind::InvalidArgument, "trial count must be non-negative");
  if (opt.max_alphabet < 2) raise(ErrorKind::InvalidArgument, "max alphabet must be at least 2");
  std::vector<MiTrialRow> rows(static_cast<std::size_t>(opt.trials));
  const int workers = std::max(1, std::min(opt.threads, opt.trials));
  if (workers == 1) {
    for (int t = 0; t < opt.trials; ++t) rows[t] = run_mi_trial(opt, t);
    return rows;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int t = w; t < opt.trials; t += workers) rows[t] = run_mi_trial(opt, t);
    });
  }
  for (auto& th : pool) th.join();
  return rows;
}

}  // namespace timix

#endif  // TIMIX_MI_VERIFY_HPP_
