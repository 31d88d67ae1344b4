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

#ifndef TIMIX_SCORE_MAP_HPP_
#define TIMIX_SCORE_MAP_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "timix/error.hpp"
#include "timix/linalg.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/rng.hpp"

namespace timix {

/// Probabilities are clamped to [kScoreClamp, 1 - kScoreClamp] before taking logs.
inline constexpr double kScoreClamp = 1e-7;

/**
 * Text-aware patch predictor: a three-layer perceptron that maps the
 * concatenation [patch feature; text embedding] (2D inputs) to a relevance
 * probability.
 *
 *   h1 = relu(W1 x + b1)      W1: Dh x 2D
 *   h2 = relu(W2 h1 + b2)     W2: Dh x Dh
 *   a  = sigmoid(w3 . h2 + b3)
 */
class TppModel {
 public:
  TppModel() = default;

  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  TppModel(int dim, int hidden, std::uint64_t seed) : dim_(dim), hidden_(hidden), seed_(seed) {
    if (dim <= 0 || hidden <= 0) raise(ErrorKind::InvalidArgument, "TPP dimensions must be positive");
    allocate();
    Rng rng(seed);
    auto fill = [&](std::span<double> s, int fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : s) v = rng.uniform(-bound, bound);
    };
    fill(w1_.data, 2 * dim);
    fill(b1_, 2 * dim);
    fill(w2_.data, hidden);
    fill(b2_, hidden);
    fill(w3_, hidden);
    std::span<double> b3(&b3_, 1);
    fill(b3, hidden);
  }

  static TppModel zeros(int dim, int hidden) {
    TppModel m;
    m.dim_ = dim;
    m.hidden_ = hidden;
    m.allocate();
    return m;
  }

  int dim() const noexcept { return dim_; }
  int hidden() const noexcept { return hidden_; }
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

  Matrix& w1() { return w1_; }
  const Matrix& w1() const { return w1_; }
  std::vector<double>& b1() { return b1_; }
  const std::vector<double>& b1() const { return b1_; }
  Matrix& w2() { return w2_; }
  const Matrix& w2() const { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& b2() const { return b2_; }
  std::vector<double>& w3() { return w3_; }
  const std::vector<double>& w3() const { return w3_; }
  double& b3() { return b3_; }
  double b3() const { return b3_; }

  std::size_t parameter_count() const {
    return w1_.data.size() + b1_.size() + w2_.data.size() + b2_.size() + w3_.size() + 1;
  }

  /// Flattened view order: W1, b1, W2, b2, w3, b3.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    out.insert(out.end(), w1_.data.begin(), w1_.data.end());
    out.insert(out.end(), b1_.begin(), b1_.end());
    out.insert(out.end(), w2_.data.begin(), w2_.data.end());
    out.insert(out.end(), b2_.begin(), b2_.end());
    out.insert(out.end(), w3_.begin(), w3_.end());
    out.push_back(b3_);
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count()) raise(ErrorKind::LengthMismatch, "parameter vector size mismatch");
    auto it = flat.begin();
    auto take = [&](std::span<double> dst) {
      std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
      it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(w1_.data);
    take(b1_);
    take(w2_.data);
    take(b2_);
    take(w3_);
    b3_ = *it;
  }

  bool operator==(const TppModel&) const = default;

 private:
  void allocate() {
    const auto d = static_cast<std::size_t>(dim_);
    const auto h = static_cast<std::size_t>(hidden_);
    w1_ = Matrix(h, 2 * d);
    b1_.assign(h, 0.0);
    w2_ = Matrix(h, h);
    b2_.assign(h, 0.0);
    w3_.assign(h, 0.0);
    b3_ = 0.0;
  }

  int dim_ = 0;
  int hidden_ = 0;
  std::uint64_t seed_ = 0;
  Matrix w1_;
  std::vector<double> b1_;
  Matrix w2_;
  std::vector<double> b2_;
  std::vector<double> w3_;
  double b3_ = 0.0;
};

/// Per-patch text relevance scores on a grid, row-major, each in (0, 1).
struct ScoreMap {
  PatchGrid grid;
  std::vector<double> scores;

  double at(int row, int col) const { return scores[static_cast<std::size_t>(grid.index(row, col))]; }
};

inline ScoreMap make_score_map(const PatchGrid& grid, std::vector<double> scores) {
  if (scores.size() != static_cast<std::size_t>(grid.size())) {
    raise(ErrorKind::LengthMismatch, "score map needs " + std::to_string(grid.size()) + " entries");
  }
  return ScoreMap{grid, std::move(scores)};
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct TppActivations {
  std::vector<double> z1, h1, z2, h2;
  double score = 0.0;
};

inline void check_inputs(const TppModel& model, std::span<const Embedding> patches, const Embedding& text) {
  const auto d = static_cast<std::size_t>(model.dim());
  if (text.size() != d) raise(ErrorKind::DimensionMismatch, "text embedding has wrong dimension");
  for (const auto& p : patches) {
    if (p.size() != d) raise(ErrorKind::DimensionMismatch, "patch feature has wrong dimension");
  }
}

/// W1 restricted to the text half, applied once per (image, text) pair.
inline std::vector<double> text_projection(const TppModel& m, const Embedding& text) {
  const auto d = static_cast<std::size_t>(m.dim());
  std::vector<double> out(m.b1());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto row = m.w1().row(r);
    for (std::size_t c = 0; c < d; ++c) out[r] += row[d + c] * text[c];
  }
  return out;
}

inline TppActivations tpp_patch(const TppModel& m, const Embedding& patch, std::span<const double> text_part) {
  const auto d = static_cast<std::size_t>(m.dim());
  const auto h = static_cast<std::size_t>(m.hidden());
  TppActivations a;
  a.z1.assign(text_part.begin(), text_part.end());
  for (std::size_t r = 0; r < h; ++r) {
    const auto row = m.w1().row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += row[c] * patch[c];
    a.z1[r] += s;
  }
  a.h1.resize(h);
  for (std::size_t r = 0; r < h; ++r) a.h1[r] = std::max(0.0, a.z1[r]);
  a.z2 = m.w2().apply(a.h1);
  for (std::size_t r = 0; r < h; ++r) a.z2[r] += m.b2()[r];
  a.h2.resize(h);
  for (std::size_t r = 0; r < h; ++r) a.h2[r] = std::max(0.0, a.z2[r]);
  a.score = sigmoid(dot(m.w3(), a.h2) + m.b3());
  return a;
}

inline double clamp_score(double a) { return std::clamp(a, kScoreClamp, 1.0 - kScoreClamp); }

}  // namespace detail

/// Scores every patch against one text embedding.
inline std::vector<double> tpp_scores(const TppModel& model, std::span<const Embedding> patches,
                                      const Embedding& text) {
  detail::check_inputs(model, patches, text);
  const auto text_part = detail::text_projection(model, text);
  std::vector<double> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(detail::tpp_patch(model, p, text_part).score);
  return out;
}

inline ScoreMap tpp_forward(const TppModel& model, const PatchGrid& grid, std::span<const Embedding> patches,
                            const Embedding& text) {
  if (patches.size() != static_cast<std::size_t>(grid.size())) {
    raise(ErrorKind::DimensionMismatch, "expected " + std::to_string(grid.size()) + " patch features");
  }
  return ScoreMap{grid, tpp_scores(model, patches, text)};
}

/// Mean binary cross-entropy between scores and patch labels (non-negative).
inline double pta_loss(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) raise(ErrorKind::LengthMismatch, "scores and labels differ in length");
  if (scores.empty()) raise(ErrorKind::LengthMismatch, "empty score sequence");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || scores[i] < 0.0 || scores[i] > 1.0) {
      raise(ErrorKind::NonFiniteScore, "score " + std::to_string(i) + " is not a probability");
    }
    const double a = detail::clamp_score(scores[i]);
    total += labels[i] ? std::log(a) : std::log1p(-a);
  }
  return -total / static_cast<double>(scores.size());
}

inline double pta_loss(const ScoreMap& map, const PatchLabels& labels) { return pta_loss(map.scores, labels); }

/// Gradient of pta_loss w.r.t. model parameters (flattened) and inputs.
struct PtaGradient {
  std::vector<double> params;
  std::vector<Embedding> patches;
  Embedding text;
  double loss = 0.0;
};

/**
 * Exact gradient of the per-pair PTA loss. Patches whose score lies in the
 * clamped region contribute zero gradient, matching the clamped loss.
 */
inline PtaGradient pta_grad(const TppModel& model, std::span<const Embedding> patches, const Embedding& text,
                            std::span<const std::uint8_t> labels) {
  detail::check_inputs(model, patches, text);
  if (patches.size() != labels.size() || patches.empty()) {
    raise(ErrorKind::LengthMismatch, "patch and label counts differ");
  }
  const auto d = static_cast<std::size_t>(model.dim());
  const auto h = static_cast<std::size_t>(model.hidden());
  const double inv_n = 1.0 / static_cast<double>(patches.size());

  TppModel g = TppModel::zeros(model.dim(), model.hidden());
  PtaGradient out;
  out.patches.assign(patches.size(), Embedding(d, 0.0));
  out.text.assign(d, 0.0);

  const auto text_part = detail::text_projection(model, text);
  std::vector<double> dz1_total(h, 0.0);
  double loss = 0.0;
  std::vector<double> dz2(h), dh1(h), dz1(h);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto act = detail::tpp_patch(model, patches[i], text_part);
    const double a = act.score;
    const double ac = detail::clamp_score(a);
    loss += labels[i] ? std::log(ac) : std::log1p(-ac);
    if (a <= kScoreClamp || a >= 1.0 - kScoreClamp) continue;
    const double dz3 = (a - static_cast<double>(labels[i])) * inv_n;

    g.b3() += dz3;
    for (std::size_t r = 0; r < h; ++r) {
      g.w3()[r] += dz3 * act.h2[r];
      dz2[r] = act.z2[r] > 0.0 ? dz3 * model.w3()[r] : 0.0;
    }
    for (std::size_t r = 0; r < h; ++r) g.b2()[r] += dz2[r];
    g.w2().add_outer(1.0, dz2, act.h1);
    std::fill(dh1.begin(), dh1.end(), 0.0);
    for (std::size_t r = 0; r < h; ++r) {
      if (dz2[r] == 0.0) continue;
      const auto row = model.w2().row(r);
      for (std::size_t c = 0; c < h; ++c) dh1[c] += dz2[r] * row[c];
    }
    for (std::size_t r = 0; r < h; ++r) dz1[r] = act.z1[r] > 0.0 ? dh1[r] : 0.0;

    // Patch half of W1 and the patch input gradient.
    for (std::size_t r = 0; r < h; ++r) {
      if (dz1[r] == 0.0) continue;
      auto grow = g.w1().row(r);
      const auto mrow = model.w1().row(r);
      for (std::size_t c = 0; c < d; ++c) {
        grow[c] += dz1[r] * patches[i][c];
        out.patches[i][c] += dz1[r] * mrow[c];
      }
      dz1_total[r] += dz1[r];
    }
  }
  // Text half of W1, b1 and text input gradient accumulate over patches.
  for (std::size_t r = 0; r < h; ++r) {
    if (dz1_total[r] == 0.0) continue;
    g.b1()[r] += dz1_total[r];
    auto grow = g.w1().row(r);
    const auto mrow = model.w1().row(r);
    for (std::size_t c = 0; c < d; ++c) {
      grow[d + c] += dz1_total[r] * text[c];
      out.text[c] += dz1_total[r] * mrow[d + c];
    }
  }
  out.params = g.flatten();
  out.loss = -loss * inv_n;
  return out;
}

/// One (image, text, labels) PTA training example.
struct PtaExample {
  std::vector<Embedding> patches;
  Embedding text;
  PatchLabels labels;
};

/**
 * One gradient-descent step on the batch-mean PTA loss. Returns the loss
 * evaluated before the update.
 */
inline double pta_train_step(TppModel& model, std::span<const PtaExample> batch, double lr) {
  if (!(lr >= 0.0)) raise(ErrorKind::InvalidArgument, "learning rate must be non-negative");
  if (batch.empty()) raise(ErrorKind::BatchTooSmall, "empty PTA batch");
  std::vector<double> grad(model.parameter_count(), 0.0);
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto g = pta_grad(model, ex.patches, ex.text, ex.labels);
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g.params[k];
    loss += g.loss;
  }
  const double scale = lr / static_cast<double>(batch.size());
  if (scale != 0.0) {
    auto flat = model.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= scale * grad[k];
    model.unflatten(flat);
  }
  return loss / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON, doubles written as shortest round-trip decimals.

inline constexpr int kTppCheckpointVersion = 1;

inline std::string save_tpp_checkpoint(const TppModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "timix-tpp";
  j["version"] = kTppCheckpointVersion;
  j["D"] = m.dim();
  j["Dh"] = m.hidden();
  j["seed"] = m.seed();
  j["w1"] = m.w1().data;
  j["b1"] = m.b1();
  j["w2"] = m.w2().data;
  j["b2"] = m.b2();
  j["w3"] = m.w3();
  j["b3"] = m.b3();
  return j.dump() + "\n";
}

inline TppModel load_tpp_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::SchemaError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "timix-tpp") raise(ErrorKind::SchemaError, "not a TPP checkpoint");
    if (j.at("version").get<int>() != kTppCheckpointVersion) {
      raise(ErrorKind::VersionMismatch, "unsupported TPP checkpoint version " + j.at("version").dump());
    }
    const int d = j.at("D").get<int>();
    const int h = j.at("Dh").get<int>();
    if (d <= 0 || h <= 0) raise(ErrorKind::SchemaError, "checkpoint dimensions must be positive");
    TppModel m = TppModel::zeros(d, h);
    auto read = [&](const char* key, std::vector<double>& dst) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != dst.size()) raise(ErrorKind::SchemaError, std::string("field ") + key + " has wrong size");
      dst = std::move(v);
    };
    read("w1", m.w1().data);
    read("b1", m.b1());
    read("w2", m.w2().data);
    read("b2", m.b2());
    read("w3", m.w3());
    m.b3() = j.at("b3").get<double>();
    m.set_seed(j.at("seed").get<std::uint64_t>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::SchemaError, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void write_tpp_checkpoint(const std::string& path, const TppModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::IoError, "cannot open " + path + " for writing");
  out << save_tpp_checkpoint(m);
  if (!out) raise(ErrorKind::IoError, "failed writing " + path);
}

inline TppModel read_tpp_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::MissingFile, "cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_tpp_checkpoint(ss.str());
}

}  // namespace timix

#endif  // TIMIX_SCORE_MAP_HPP_
