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

#ifndef TIMIX_CONTRASTIVE_HPP_
#define TIMIX_CONTRASTIVE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "timix/csv.hpp"
#include "timix/error.hpp"
#include "timix/linalg.hpp"
#include "timix/region_mixer.hpp"

namespace timix {

enum class SimilarityKind { ExpDot, ExpCosine };

/**
 * f(u, t) = exp(<u, t> / tau) or exp(cos(u, t) / tau).
 *
 * With `exclusive_denominator` set, each positive's softmax denominator drops
 * the anchor's other positive instead of counting it as a negative.
 */
struct SimilarityConfig {
  SimilarityKind kind = SimilarityKind::ExpCosine;
  double temperature = 0.07;
  bool exclusive_denominator = false;
};

inline void validate(const SimilarityConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    raise(ErrorKind::InvalidArgument, "temperature must be positive");
  }
}

/// log f(u, t)
inline double similarity_logit(std::span<const double> u, std::span<const double> t, const SimilarityConfig& cfg) {
  const double d = dot(u, t);
  if (cfg.kind == SimilarityKind::ExpDot) return d / cfg.temperature;
  const double nu = norm(u);
  const double nt = norm(t);
  if (nu == 0.0 || nt == 0.0) raise(ErrorKind::ZeroNorm, "cosine similarity of a zero vector");
  return d / (nu * nt) / cfg.temperature;
}

inline double similarity(std::span<const double> u, std::span<const double> t, const SimilarityConfig& cfg) {
  validate(cfg);
  return std::exp(similarity_logit(u, t, cfg));
}

struct Positive {
  std::size_t index = 0;
  double weight = 1.0;
};

/// Anchors scored against all candidates; each anchor has one or two weighted positives.
struct ContrastiveBatch {
  std::vector<Embedding> anchors;
  std::vector<Embedding> candidates;
  std::vector<std::vector<Positive>> positives;

  /// Anchor i's single positive is candidate i.
  static ContrastiveBatch paired(std::vector<Embedding> anchors, std::vector<Embedding> candidates) {
    ContrastiveBatch b{std::move(anchors), std::move(candidates), {}};
    b.positives.resize(b.anchors.size());
    for (std::size_t i = 0; i < b.anchors.size(); ++i) b.positives[i] = {Positive{i, 1.0}};
    return b;
  }
};

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<double> anchor_losses;
  std::vector<Embedding> grad_anchors;
  std::vector<Embedding> grad_candidates;
};

enum class LossKind { Vanilla, I2T, T2I };

inline constexpr double kWeightSumTolerance = 1e-12;

namespace detail {

inline void validate_batch(const ContrastiveBatch& b, LossKind kind) {
  if (b.anchors.empty()) raise(ErrorKind::BatchTooSmall, "batch has no anchors");
  if (b.candidates.empty()) raise(ErrorKind::BatchTooSmall, "batch has no candidates");
  if (b.positives.size() != b.anchors.size()) raise(ErrorKind::LengthMismatch, "one positive set per anchor");
  const std::size_t dim = b.anchors.front().size();
  for (const auto& a : b.anchors) {
    if (a.size() != dim) raise(ErrorKind::DimensionMismatch, "anchor dimensions differ");
  }
  for (const auto& c : b.candidates) {
    if (c.size() != dim) raise(ErrorKind::DimensionMismatch, "candidate dimensions differ");
  }
  for (std::size_t i = 0; i < b.positives.size(); ++i) {
    const auto& ps = b.positives[i];
    if (ps.empty() || ps.size() > 2) raise(ErrorKind::InvalidArgument, "anchors need one or two positives");
    if (kind == LossKind::Vanilla && ps.size() != 1) {
      raise(ErrorKind::InvalidArgument, "vanilla InfoNCE takes exactly one positive per anchor");
    }
    double sum = 0.0;
    for (const auto& p : ps) {
      if (p.index >= b.candidates.size()) raise(ErrorKind::IndexOutOfRange, "positive index out of range");
      if (!(p.weight >= 0.0)) raise(ErrorKind::WeightSumViolation, "negative positive weight");
      sum += p.weight;
    }
    if (ps.size() == 2 && ps[0].index == ps[1].index) raise(ErrorKind::InvalidArgument, "positives must be distinct");
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
      raise(ErrorKind::WeightSumViolation, "anchor " + std::to_string(i) + " weights sum to " + format_real(sum));
    }
  }
}

inline bool is_positive(const std::vector<Positive>& ps, std::size_t k) {
  for (const auto& p : ps) {
    if (p.index == k) return true;
  }
  return false;
}

/// log sum_{k in set} exp(l_k) with the max subtracted first.
template <typename Pred>
double log_sum_exp(std::span<const double> logits, Pred in_set) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (in_set(k)) m = std::max(m, logits[k]);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (in_set(k)) s += std::exp(logits[k] - m);
  }
  return m + std::log(s);
}

/// Accumulates d logit(u, t) into du and dt scaled by g.
inline void logit_backward(const Embedding& u, const Embedding& t, double g, const SimilarityConfig& cfg,
                           Embedding& du, Embedding& dt) {
  if (g == 0.0) return;
  const double inv_tau = 1.0 / cfg.temperature;
  if (cfg.kind == SimilarityKind::ExpDot) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      du[j] += g * inv_tau * t[j];
      dt[j] += g * inv_tau * u[j];
    }
    return;
  }
  const double nu = norm(u);
  const double nt = norm(t);
  const double c = dot(u, t) / (nu * nt);
  const double a = g * inv_tau;
  for (std::size_t j = 0; j < u.size(); ++j) {
    du[j] += a * (t[j] / (nu * nt) - c * u[j] / (nu * nu));
    dt[j] += a * (u[j] / (nu * nt) - c * t[j] / (nt * nt));
  }
}

inline ContrastiveResult weighted_contrastive(const ContrastiveBatch& b, const SimilarityConfig& cfg, LossKind kind,
                                              bool with_grad) {
  validate(cfg);
  validate_batch(b, kind);
  const std::size_t n = b.anchors.size();
  const std::size_t m = b.candidates.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  ContrastiveResult res;
  res.anchor_losses.assign(n, 0.0);
  if (with_grad) {
    res.grad_anchors.assign(n, Embedding(b.anchors.front().size(), 0.0));
    res.grad_candidates.assign(m, Embedding(b.anchors.front().size(), 0.0));
  }
  std::vector<double> logits(m), dlogits(m);
  KahanSum total;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) logits[k] = similarity_logit(b.anchors[i], b.candidates[k], cfg);
    const auto& ps = b.positives[i];
    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    double li = 0.0;
    for (const auto& p : ps) {
      const bool exclusive = cfg.exclusive_denominator && ps.size() == 2;
      auto in_set = [&](std::size_t k) { return !exclusive || k == p.index || !is_positive(ps, k); };
      const double lse = log_sum_exp(logits, in_set);
      li -= p.weight * (logits[p.index] - lse);
      if (with_grad) {
        for (std::size_t k = 0; k < m; ++k) {
          if (in_set(k)) dlogits[k] += p.weight * std::exp(logits[k] - lse);
        }
        dlogits[p.index] -= p.weight;
      }
    }
    res.anchor_losses[i] = li;
    total.add(li);
    if (with_grad) {
      for (std::size_t k = 0; k < m; ++k) {
        logit_backward(b.anchors[i], b.candidates[k], dlogits[k] * inv_n, cfg, res.grad_anchors[i],
                       res.grad_candidates[k]);
      }
    }
  }
  res.loss = total.value() * inv_n;
  return res;
}

}  // namespace detail

/// Mean over anchors of -log softmax at the single positive.
inline double infonce_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg) {
  return detail::weighted_contrastive(batch, cfg, LossKind::Vanilla, false).loss;
}

/// Mixed-image anchors against caption candidates, two soft-labelled positives each.
inline double timix_i2t_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg) {
  return detail::weighted_contrastive(batch, cfg, LossKind::I2T, false).loss;
}

/// Caption anchors against mixed-image candidates, two soft-labelled positives each.
inline double timix_t2i_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg) {
  return detail::weighted_contrastive(batch, cfg, LossKind::T2I, false).loss;
}

/// Loss, per-anchor terms and exact gradients w.r.t. every anchor and candidate.
inline ContrastiveResult loss_grad(const ContrastiveBatch& batch, const SimilarityConfig& cfg, LossKind which) {
  return detail::weighted_contrastive(batch, cfg, which, true);
}

/**
 * Image-to-text batch for mixed samples: anchor j is mixed image j, its
 * positives are the target caption (weight s_tgt) and source caption (s_src).
 */
inline ContrastiveBatch make_i2t_batch(std::vector<Embedding> mixed_images, std::vector<Embedding> texts,
                                       std::span<const MixedSample> samples) {
  if (mixed_images.size() != samples.size()) raise(ErrorKind::LengthMismatch, "one embedding per mixed sample");
  ContrastiveBatch b{std::move(mixed_images), std::move(texts), {}};
  b.positives.reserve(samples.size());
  for (const auto& s : samples) {
    b.positives.push_back({Positive{s.target, s.recipe.s_tgt}, Positive{s.source, s.recipe.s_src}});
  }
  return b;
}

/**
 * Text-to-image batch: caption i's positives are the mix where its image was
 * the target (weight s_tgt) and the mix where it was the source (s_src).
 */
inline ContrastiveBatch make_t2i_batch(std::vector<Embedding> texts, std::vector<Embedding> mixed_images,
                                       std::span<const MixedSample> samples) {
  if (mixed_images.size() != samples.size()) raise(ErrorKind::LengthMismatch, "one embedding per mixed sample");
  ContrastiveBatch b{std::move(texts), std::move(mixed_images), {}};
  b.positives.assign(b.anchors.size(), {});
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    if (s.target >= b.anchors.size() || s.source >= b.anchors.size()) {
      raise(ErrorKind::IndexOutOfRange, "mixed sample refers to a missing caption");
    }
    b.positives[s.target].push_back(Positive{j, s.recipe.s_tgt});
    b.positives[s.source].push_back(Positive{j, s.recipe.s_src});
  }
  return b;
}

/// Per-anchor debug rows: anchor, loss term, positives with weights, full logit row.
inline void write_contrastive_dump(std::ostream& out, const ContrastiveBatch& batch, const SimilarityConfig& cfg,
                                   LossKind which) {
  const auto res = detail::weighted_contrastive(batch, cfg, which, false);
  CsvWriter csv(out);
  std::vector<std::string> head{"anchor", "loss_term", "pos1", "w1", "pos2", "w2"};
  for (std::size_t k = 0; k < batch.candidates.size(); ++k) head.push_back("logit_" + std::to_string(k));
  csv.header(head);
  for (std::size_t i = 0; i < batch.anchors.size(); ++i) {
    const auto& ps = batch.positives[i];
    std::vector<std::string> row{std::to_string(i), format_real(res.anchor_losses[i]), std::to_string(ps[0].index),
                                 format_real(ps[0].weight)};
    if (ps.size() > 1) {
      row.push_back(std::to_string(ps[1].index));
      row.push_back(format_real(ps[1].weight));
    } else {
      row.push_back("");
      row.push_back("");
    }
    for (const auto& c : batch.candidates) row.push_back(format_real(similarity_logit(batch.anchors[i], c, cfg)));
    csv.row(row);
  }
}

}  // namespace timix

#endif  // TIMIX_CONTRASTIVE_HPP_
