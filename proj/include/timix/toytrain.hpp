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

#ifndef TIMIX_TOYTRAIN_HPP_
#define TIMIX_TOYTRAIN_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "timix/contrastive.hpp"
#include "timix/error.hpp"
#include "timix/linalg.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/region_mixer.hpp"
#include "timix/rng.hpp"
#include "timix/score_map.hpp"

namespace timix {

// ---------------------------------------------------------------------------
// Synthetic partially aligned data.

/// Generator settings. `rho` is the probability that a caption concept has no region in the image.
struct SyntheticSpec {
  int height = 64;
  int width = 64;
  int patch = 16;
  int concepts = 24;
  int feature_dim = 16;
  int caption_size = 3;
  int distractors = 1;
  int max_region_side = 2;
  double noise_std = 0.3;
  double background = 0.0;  ///< scale of a feature component shared by every patch
  double rho = 0.4;
  int size = 256;
  std::uint64_t seed = 0;

  PatchGrid grid() const { return PatchGrid::make(height, width, patch); }

  void validate() const {
    const auto g = grid();
    if (concepts < 2) raise(ErrorKind::InvalidSpec, "need at least 2 concepts");
    if (feature_dim < 1) raise(ErrorKind::InvalidSpec, "feature_dim must be positive");
    if (caption_size < 1 || caption_size > concepts) raise(ErrorKind::InvalidSpec, "caption_size out of range");
    if (distractors < 0 || caption_size + distractors > concepts) {
      raise(ErrorKind::InvalidSpec, "caption plus distractor concepts exceed the concept count");
    }
    if (max_region_side < 1 || max_region_side > std::min(g.rows(), g.cols())) {
      raise(ErrorKind::InvalidSpec, "max_region_side out of range");
    }
    if (caption_size + distractors > g.size()) raise(ErrorKind::InvalidSpec, "grid too small for the planted regions");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) raise(ErrorKind::InvalidSpec, "noise_std must be >= 0");
    if (!(background >= 0.0) || !std::isfinite(background)) raise(ErrorKind::InvalidSpec, "background must be >= 0");
    if (!(rho >= 0.0 && rho < 1.0)) {
      raise(ErrorKind::InvalidSpec, "rho must lie in [0, 1); every image needs a caption-relevant region");
    }
    if (size < 1) raise(ErrorKind::InvalidSpec, "dataset size must be positive");
  }
};

struct PlantedRegion {
  int concept_id = 0;
  WindowSpec window;
  bool in_caption = false;
};

struct ToyExample {
  PatchFeatures patches;
  std::vector<int> caption;  ///< sorted concept ids
  std::vector<PlantedRegion> regions;
  PatchLabels relevant;       ///< 1 on patches of planted caption concepts
  WindowSpec relevant_window; ///< bounding window of `relevant`

  bool operator==(const ToyExample& o) const {
    return patches == o.patches && caption == o.caption && relevant == o.relevant &&
           relevant_window == o.relevant_window && regions.size() == o.regions.size() &&
           std::equal(regions.begin(), regions.end(), o.regions.begin(), [](const auto& a, const auto& b) {
             return a.concept_id == b.concept_id && a.window == b.window && a.in_caption == b.in_caption;
           });
  }
};

struct ToyDataset {
  SyntheticSpec spec;
  PatchGrid grid = PatchGrid::make(32, 32, 16);
  std::vector<Embedding> prototypes;
  Embedding background;
  std::vector<ToyExample> examples;
};

namespace detail {

inline bool overlaps(const WindowSpec& a, const WindowSpec& b) {
  return a.row < b.row + b.h && b.row < a.row + a.h && a.col < b.col + b.w && b.col < a.col + a.w;
}

inline WindowSpec place_region(const PatchGrid& grid, int max_side, const std::vector<PlantedRegion>& taken,
                               Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int h = static_cast<int>(rng.integer(1, max_side));
    const int w = static_cast<int>(rng.integer(1, max_side));
    const WindowSpec win{static_cast<int>(rng.integer(0, grid.rows() - h)),
                         static_cast<int>(rng.integer(0, grid.cols() - w)), h, w};
    if (std::none_of(taken.begin(), taken.end(), [&](const auto& r) { return overlaps(r.window, win); })) return win;
  }
  // Crowded grid: first free cell.
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const WindowSpec win{r, c, 1, 1};
      if (std::none_of(taken.begin(), taken.end(), [&](const auto& t) { return overlaps(t.window, win); })) return win;
    }
  }
  raise(ErrorKind::InvalidSpec, "no free cell left for a planted region");
}

}  // namespace detail

inline ToyExample generate_example(const SyntheticSpec& spec, const PatchGrid& grid,
                                   const std::vector<Embedding>& prototypes, const Embedding& background, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(spec.concepts));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  ToyExample ex;
  ex.caption.assign(order.begin(), order.begin() + spec.caption_size);
  std::vector<bool> present(ex.caption.size());
  bool any = false;
  for (std::size_t i = 0; i < present.size(); ++i) {
    present[i] = !rng.bernoulli(spec.rho);
    any = any || present[i];
  }
  if (!any) present[static_cast<std::size_t>(rng.integer(0, spec.caption_size - 1))] = true;

  for (std::size_t i = 0; i < ex.caption.size(); ++i) {
    if (!present[i]) continue;
    ex.regions.push_back({ex.caption[i], detail::place_region(grid, spec.max_region_side, ex.regions, rng), true});
  }
  for (int d = 0; d < spec.distractors; ++d) {
    const int cid = order[static_cast<std::size_t>(spec.caption_size + d)];
    ex.regions.push_back({cid, detail::place_region(grid, spec.max_region_side, ex.regions, rng), false});
  }
  std::sort(ex.caption.begin(), ex.caption.end());

  const auto n = static_cast<std::size_t>(grid.size());
  ex.patches.assign(n, Embedding(static_cast<std::size_t>(spec.feature_dim), 0.0));
  for (auto& p : ex.patches) {
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = background[k] + rng.normal(0.0, spec.noise_std);
  }
  ex.relevant.assign(n, 0);
  int r0 = grid.rows(), c0 = grid.cols(), r1 = -1, c1 = -1;
  for (const auto& reg : ex.regions) {
    for (int r = reg.window.row; r < reg.window.row + reg.window.h; ++r) {
      for (int c = reg.window.col; c < reg.window.col + reg.window.w; ++c) {
        const auto idx = static_cast<std::size_t>(grid.index(r, c));
        const auto& mu = prototypes[static_cast<std::size_t>(reg.concept_id)];
        for (std::size_t k = 0; k < mu.size(); ++k) ex.patches[idx][k] += mu[k];
        if (reg.in_caption) {
          ex.relevant[idx] = 1;
          r0 = std::min(r0, r);
          c0 = std::min(c0, c);
          r1 = std::max(r1, r);
          c1 = std::max(c1, c);
        }
      }
    }
  }
  ex.relevant_window = {r0, c0, r1 - r0 + 1, c1 - c0 + 1};
  return ex;
}

/**
 * Patch-feature grids with planted concept regions: background patches are
 * Gaussian noise, planted patches add the concept prototype. Prototypes come
 * from stream 0 of the seed, examples from stream 1.
 */
inline ToyDataset generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  ToyDataset ds;
  ds.spec = spec;
  ds.grid = spec.grid();
  Rng proto_rng(derive_seed(spec.seed, 0));
  ds.prototypes.assign(static_cast<std::size_t>(spec.concepts), Embedding(static_cast<std::size_t>(spec.feature_dim)));
  for (auto& p : ds.prototypes) {
    for (auto& v : p) v = proto_rng.normal();
  }
  ds.background.assign(static_cast<std::size_t>(spec.feature_dim), 0.0);
  for (auto& v : ds.background) v = spec.background * proto_rng.normal();
  Rng rng(derive_seed(spec.seed, 1));
  ds.examples.reserve(static_cast<std::size_t>(spec.size));
  for (int i = 0; i < spec.size; ++i) {
    ds.examples.push_back(generate_example(spec, ds.grid, ds.prototypes, ds.background, rng));
  }
  return ds;
}

/// Held-out split: same prototypes, fresh examples from an independent stream.
inline ToyDataset generate_heldout(const ToyDataset& train, int size, double rho, std::uint64_t stream = 2) {
  SyntheticSpec spec = train.spec;
  spec.rho = rho;
  spec.size = size;
  spec.validate();
  ToyDataset ds;
  ds.spec = spec;
  ds.grid = train.grid;
  ds.prototypes = train.prototypes;
  ds.background = train.background;
  Rng rng(derive_seed(train.spec.seed, stream));
  for (int i = 0; i < size; ++i) {
    ds.examples.push_back(generate_example(spec, ds.grid, ds.prototypes, ds.background, rng));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dual encoder.

/// Linear image and text encoders into a shared D-dimensional space.
struct DualEncoder {
  Matrix image;  ///< D x feature_dim
  Matrix text;   ///< D x concepts

  DualEncoder() = default;
  DualEncoder(int dim, int feature_dim, int concepts, std::uint64_t seed)
      : image(static_cast<std::size_t>(dim), static_cast<std::size_t>(feature_dim)),
        text(static_cast<std::size_t>(dim), static_cast<std::size_t>(concepts)) {
    Rng rng(seed);
    const double si = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    const double st = 1.0 / std::sqrt(static_cast<double>(concepts));
    for (auto& v : image.data) v = rng.uniform(-si, si);
    for (auto& v : text.data) v = rng.uniform(-st, st);
  }

  int dim() const { return static_cast<int>(image.rows); }

  Embedding encode_patch(const Embedding& x) const { return image.apply(x); }
  Embedding encode_pooled(const PatchFeatures& patches) const { return image.apply(mean_pool(patches)); }
  Embedding encode_caption(const std::vector<int>& caption) const { return text.apply(multi_hot(caption)); }

  std::vector<double> multi_hot(const std::vector<int>& caption) const {
    std::vector<double> v(text.cols, 0.0);
    for (int c : caption) v[static_cast<std::size_t>(c)] = 1.0;
    return v;
  }

  static Embedding mean_pool(const PatchFeatures& patches) {
    Embedding m(patches.front().size(), 0.0);
    for (const auto& p : patches) {
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += p[k];
    }
    for (auto& v : m) v /= static_cast<double>(patches.size());
    return m;
  }

  bool finite() const { return all_finite(image.data) && all_finite(text.data); }
};

// ---------------------------------------------------------------------------
// Training.

enum class Strategy { None, Mixup, CutMix, TiMix };
enum class MixKind { None, Convex, Random, TextAware };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::Mixup: return "mixup";
    case Strategy::CutMix: return "cutmix";
    case Strategy::TiMix: return "timix";
  }
  return "unknown";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "none") return Strategy::None;
  if (s == "mixup") return Strategy::Mixup;
  if (s == "cutmix") return Strategy::CutMix;
  if (s == "timix") return Strategy::TiMix;
  raise(ErrorKind::InvalidArgument, "unknown strategy '" + s + "'");
}

/// Which pieces of the method are active.
struct Components {
  bool pta = false;
  MixKind mix = MixKind::None;
};

inline Components components_of(Strategy s) {
  switch (s) {
    case Strategy::None: return {false, MixKind::None};
    case Strategy::Mixup: return {false, MixKind::Convex};
    case Strategy::CutMix: return {false, MixKind::Random};
    case Strategy::TiMix: return {true, MixKind::TextAware};
  }
  return {};
}

struct TrainConfig {
  Components components = components_of(Strategy::TiMix);
  int epochs = 30;
  int warmup_epochs = 2;
  double lr = 2.0;
  int batch_size = 32;
  int embed_dim = 16;
  int hidden_dim = 16;
  double temperature = 0.1;
  double gamma_lo = kGammaLow;
  double gamma_hi = kGammaHigh;
  int eval_size = 2048;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0 || warmup_epochs < 0) raise(ErrorKind::InvalidArgument, "epochs and warmup must be non-negative");
    if (epochs < warmup_epochs) raise(ErrorKind::InvalidArgument, "epochs must be at least warmup_epochs");
    if (!(lr >= 0.0) || !std::isfinite(lr)) raise(ErrorKind::InvalidArgument, "lr must be finite and >= 0");
    if (batch_size < 2 || batch_size % 2 != 0) raise(ErrorKind::BatchTooSmall, "batch size must be even and >= 2");
    if (embed_dim < 1 || hidden_dim < 1) raise(ErrorKind::InvalidArgument, "dimensions must be positive");
    if (!(temperature > 0.0)) raise(ErrorKind::InvalidArgument, "temperature must be positive");
    SideRatio(0.5 * (gamma_lo + gamma_hi), gamma_lo, gamma_hi);
    if (eval_size < batch_size) raise(ErrorKind::InvalidArgument, "eval_size must hold at least one batch");
  }
};

/// Per-epoch record. Training losses are means over the epoch's steps; the rest is measured on held-out data.
struct EpochMetrics {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_timix_i2t = 0.0;
  double loss_timix_t2i = 0.0;
  double loss_pta = 0.0;
  double acc_at_1 = 0.0;
  double modality_gap = 0.0;
  double loss_itc = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;

  const EpochMetrics& final() const {
    if (epochs.empty()) raise(ErrorKind::InvalidArgument, "run has no epochs");
    return epochs.back();
  }
  bool operator==(const RunMetrics&) const = default;
};

struct TrainedModel {
  DualEncoder encoder;
  TppModel tpp{1, 1, 0};
};

struct TrainResult {
  RunMetrics metrics;
  TrainedModel model;
};

namespace detail {

inline constexpr std::uint64_t kStreamEncoder = 10;
inline constexpr std::uint64_t kStreamTpp = 11;
inline constexpr std::uint64_t kStreamShuffle = 12;
inline constexpr std::uint64_t kStreamMix = 13;

struct EncoderGrad {
  Matrix image;
  Matrix text;
};

inline SimilarityConfig similarity_of(const TrainConfig& cfg) {
  SimilarityConfig s;
  s.kind = SimilarityKind::ExpCosine;
  s.temperature = cfg.temperature;
  return s;
}

/// Symmetric in-batch InfoNCE, i2t accuracy and gap on a held-out split.
struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
  double gap = 0.0;
};

inline Embedding unit(const Embedding& x) {
  const double n = norm(x);
  if (!(n > 0.0)) raise(ErrorKind::ZeroNorm, "embedding has zero norm");
  Embedding out(x);
  for (auto& v : out) v /= n;
  return out;
}

inline EvalResult evaluate(const TrainedModel& m, const ToyDataset& data, const TrainConfig& cfg) {
  const auto sim = similarity_of(cfg);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = data.examples.size() / bs;
  std::vector<Embedding> img, txt;
  for (const auto& ex : data.examples) {
    img.push_back(m.encoder.encode_pooled(ex.patches));
    txt.push_back(m.encoder.encode_caption(ex.caption));
  }
  EvalResult r;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<Embedding> bi(img.begin() + b * bs, img.begin() + (b + 1) * bs);
    std::vector<Embedding> bt(txt.begin() + b * bs, txt.begin() + (b + 1) * bs);
    r.loss += 0.5 * (infonce_loss(ContrastiveBatch::paired(bi, bt), sim) +
                     infonce_loss(ContrastiveBatch::paired(bt, bi), sim));
    for (std::size_t i = 0; i < bs; ++i) {
      std::size_t best = 0;
      double best_v = -INFINITY;
      for (std::size_t k = 0; k < bs; ++k) {
        const double v = similarity_logit(bi[i], bt[k], sim);
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      // A retrieved caption identical to the true one counts as a hit.
      if (data.examples[b * bs + best].caption == data.examples[b * bs + i].caption) ++correct;
    }
  }
  r.loss /= static_cast<double>(batches);
  r.acc = static_cast<double>(correct) / static_cast<double>(batches * bs);
  Embedding ci(img.front().size(), 0.0), ct(ci.size(), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto ui = unit(img[i]);
    const auto ut = unit(txt[i]);
    for (std::size_t k = 0; k < ci.size(); ++k) {
      ci[k] += ui[k];
      ct[k] += ut[k];
    }
  }
  double g = 0.0;
  for (std::size_t k = 0; k < ci.size(); ++k) {
    const double d = (ci[k] - ct[k]) / static_cast<double>(img.size());
    g += d * d;
  }
  r.gap = std::sqrt(g);
  return r;
}

/// Scores and patch embeddings for one example under the current model.
inline std::vector<Embedding> patch_embeddings(const DualEncoder& enc, const PatchFeatures& patches) {
  std::vector<Embedding> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(enc.encode_patch(p));
  return out;
}

}  // namespace detail

/// Evaluates a trained model on a split (held-out in-batch retrieval, symmetric InfoNCE, gap).
inline detail::EvalResult evaluate(const TrainedModel& m, const ToyDataset& data, const TrainConfig& cfg) {
  return detail::evaluate(m, data, cfg);
}

/**
 * Trains the dual encoder (and the TPP when PTA is on) with plain gradient
 * descent. Each step's loss is, with equal weights:
 *   symmetric InfoNCE on the clean batch
 *   + PTA on planted caption regions                      (pta)
 *   + mixed-sample i2t + t2i soft-label losses            (mix, after warm-up)
 * Data, initialization, batch order and mixing use separate seed streams, so
 * variants sharing a seed see the same batches.
 */
inline TrainResult train(const ToyDataset& data, const ToyDataset& heldout, const TrainConfig& cfg) {
  cfg.validate();
  const auto& grid = data.grid;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  if (data.examples.size() < bs) raise(ErrorKind::BatchTooSmall, "dataset smaller than one batch");
  const auto sim = detail::similarity_of(cfg);
  const int fdim = data.spec.feature_dim;

  TrainResult res;
  res.model.encoder = DualEncoder(cfg.embed_dim, fdim, data.spec.concepts, derive_seed(cfg.seed, detail::kStreamEncoder));
  res.model.tpp = TppModel(cfg.embed_dim, cfg.hidden_dim, derive_seed(cfg.seed, detail::kStreamTpp));
  auto& enc = res.model.encoder;
  auto& tpp = res.model.tpp;

  Rng shuffle_rng(derive_seed(cfg.seed, detail::kStreamShuffle));
  Rng mix_rng(derive_seed(cfg.seed, detail::kStreamMix));
  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps = data.examples.size() / bs;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    const bool mixing = cfg.components.mix != MixKind::None && epoch > cfg.warmup_epochs;
    EpochMetrics em;
    em.epoch = epoch;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<const ToyExample*> batch;
      for (std::size_t i = 0; i < bs; ++i) batch.push_back(&data.examples[order[step * bs + i]]);

      detail::EncoderGrad g{Matrix(enc.image.rows, enc.image.cols), Matrix(enc.text.rows, enc.text.cols)};
      std::vector<double> g_tpp;
      std::vector<Embedding> pooled, hots, img, txt;
      for (const auto* ex : batch) {
        pooled.push_back(DualEncoder::mean_pool(ex->patches));
        hots.push_back(enc.multi_hot(ex->caption));
        img.push_back(enc.image.apply(pooled.back()));
        txt.push_back(enc.text.apply(hots.back()));
      }

      // Clean symmetric contrastive loss.
      const auto i2t = loss_grad(ContrastiveBatch::paired(img, txt), sim, LossKind::Vanilla);
      const auto t2i = loss_grad(ContrastiveBatch::paired(txt, img), sim, LossKind::Vanilla);
      double total = 0.5 * (i2t.loss + t2i.loss);
      for (std::size_t i = 0; i < bs; ++i) {
        g.image.add_outer(0.5, i2t.grad_anchors[i], pooled[i]);
        g.image.add_outer(0.5, t2i.grad_candidates[i], pooled[i]);
        g.text.add_outer(0.5, i2t.grad_candidates[i], hots[i]);
        g.text.add_outer(0.5, t2i.grad_anchors[i], hots[i]);
      }

      // Text-aware patch predictor; its input gradients reach both encoders.
      std::vector<std::vector<Embedding>> patch_emb;
      if (cfg.components.pta || cfg.components.mix == MixKind::TextAware) {
        for (const auto* ex : batch) patch_emb.push_back(detail::patch_embeddings(enc, ex->patches));
      }
      if (cfg.components.pta) {
        g_tpp.assign(tpp.parameter_count(), 0.0);
        double pta = 0.0;
        const double inv_b = 1.0 / static_cast<double>(bs);
        for (std::size_t i = 0; i < bs; ++i) {
          const auto pg = pta_grad(tpp, patch_emb[i], txt[i], batch[i]->relevant);
          pta += pg.loss;
          for (std::size_t k = 0; k < g_tpp.size(); ++k) g_tpp[k] += inv_b * pg.params[k];
          for (std::size_t p = 0; p < pg.patches.size(); ++p) g.image.add_outer(inv_b, pg.patches[p], batch[i]->patches[p]);
          g.text.add_outer(inv_b, pg.text, hots[i]);
        }
        pta *= inv_b;
        em.loss_pta += pta;
        total += pta;
      }

      if (mixing) {
        const auto pairs = random_pairing(bs, mix_rng);
        std::vector<PatchFeatures> mixed;
        std::vector<MixedSample> samples;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          const auto [x, y] = pairs[k];
          const SideRatio gamma = sample_side_ratio(mix_rng, cfg.gamma_lo, cfg.gamma_hi);
          const auto& px = batch[x]->patches;
          const auto& py = batch[y]->patches;
          MixRecipe rxy, ryx;
          switch (cfg.components.mix) {
            case MixKind::TextAware: {
              const auto mx = tpp_forward(tpp, grid, patch_emb[x], txt[x]);
              const auto my = tpp_forward(tpp, grid, patch_emb[y], txt[y]);
              rxy = text_aware_recipe(mx, my, gamma);
              ryx = text_aware_recipe(my, mx, gamma);
              break;
            }
            case MixKind::Random:
            case MixKind::Convex:
              rxy = random_recipe(grid, gamma, mix_rng);
              ryx = random_recipe(grid, gamma, mix_rng);
              break;
            case MixKind::None: break;
          }
          if (cfg.components.mix == MixKind::Convex) {
            auto blend = [](const PatchFeatures& t, const PatchFeatures& s, double ws) {
              PatchFeatures out = t;
              for (std::size_t p = 0; p < out.size(); ++p) {
                for (std::size_t d = 0; d < out[p].size(); ++d) out[p][d] = (1.0 - ws) * t[p][d] + ws * s[p][d];
              }
              return out;
            };
            mixed.push_back(blend(px, py, rxy.s_src));
            mixed.push_back(blend(py, px, ryx.s_src));
          } else {
            mixed.push_back(composite(px, py, grid, rxy));
            mixed.push_back(composite(py, px, grid, ryx));
          }
          samples.push_back({x, y, k, rxy});
          samples.push_back({y, x, k, ryx});
        }
        std::vector<Embedding> mpooled, memb;
        for (const auto& m : mixed) {
          mpooled.push_back(DualEncoder::mean_pool(m));
          memb.push_back(enc.image.apply(mpooled.back()));
        }
        const auto li = loss_grad(make_i2t_batch(memb, txt, samples), sim, LossKind::I2T);
        const auto lt = loss_grad(make_t2i_batch(txt, memb, samples), sim, LossKind::T2I);
        for (std::size_t j = 0; j < memb.size(); ++j) {
          g.image.add_outer(1.0, li.grad_anchors[j], mpooled[j]);
          g.image.add_outer(1.0, lt.grad_candidates[j], mpooled[j]);
        }
        for (std::size_t i = 0; i < bs; ++i) {
          g.text.add_outer(1.0, li.grad_candidates[i], hots[i]);
          g.text.add_outer(1.0, lt.grad_anchors[i], hots[i]);
        }
        em.loss_timix_i2t += li.loss;
        em.loss_timix_t2i += lt.loss;
        total += li.loss + lt.loss;
      }

      if (cfg.lr != 0.0) {
        for (std::size_t k = 0; k < enc.image.data.size(); ++k) enc.image.data[k] -= cfg.lr * g.image.data[k];
        for (std::size_t k = 0; k < enc.text.data.size(); ++k) enc.text.data[k] -= cfg.lr * g.text.data[k];
        if (!g_tpp.empty()) {
          auto flat = tpp.flatten();
          for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= cfg.lr * g_tpp[k];
          tpp.unflatten(flat);
        }
      }
      em.loss_total += total;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    em.loss_total *= inv;
    em.loss_pta *= inv;
    em.loss_timix_i2t *= inv;
    em.loss_timix_t2i *= inv;
    const auto ev = detail::evaluate(res.model, heldout, cfg);
    em.loss_itc = ev.loss;
    em.acc_at_1 = ev.acc;
    em.modality_gap = ev.gap;
    res.metrics.epochs.push_back(em);
  }
  return res;
}

/// Convenience: generates train and held-out splits from `spec` and trains with `strategy`.
inline TrainResult train(Strategy strategy, const SyntheticSpec& spec, TrainConfig cfg) {
  cfg.components = components_of(strategy);
  const auto data = generate_dataset(spec);
  const auto heldout = generate_heldout(data, cfg.eval_size, spec.rho);
  return train(data, heldout, cfg);
}

// ---------------------------------------------------------------------------
// Ablation.

enum class Variant { Full, NoPta, NoMix, None };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::Full, Variant::NoPta, Variant::NoMix, Variant::None};

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoPta: return "no-pta";
    case Variant::NoMix: return "no-mix";
    case Variant::None: return "none";
  }
  return "unknown";
}

inline Components components_of(Variant v) {
  switch (v) {
    case Variant::Full: return {true, MixKind::TextAware};
    case Variant::NoPta: return {false, MixKind::Random};
    case Variant::NoMix: return {true, MixKind::None};
    case Variant::None: return {false, MixKind::None};
  }
  return {};
}

struct AblationCell {
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  EpochMetrics final;
};

struct AblationRow {
  Variant variant = Variant::Full;
  double median_acc = 0.0;
  double median_loss_itc = 0.0;
  double median_gap = 0.0;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;

  const AblationRow& row(Variant v) const {
    for (const auto& r : rows) {
      if (r.variant == v) return r;
    }
    raise(ErrorKind::InvalidArgument, "variant missing from table");
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) raise(ErrorKind::InvalidArgument, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/**
 * Runs every (variant, seed) cell; the seed drives both data and training.
 * Cells are independent, so `threads` only changes wall time.
 */
inline AblationTable ablate(const SyntheticSpec& spec, const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                            const std::vector<Variant>& variants = {kAllVariants.begin(), kAllVariants.end()},
                            int threads = 1) {
  if (seeds.empty()) raise(ErrorKind::InvalidArgument, "ablation needs at least one seed");
  AblationTable table;
  for (Variant v : variants) {
    for (auto s : seeds) table.cells.push_back({v, s, {}});
  }
  auto run_cell = [&](AblationCell& cell) {
    SyntheticSpec sp = spec;
    sp.seed = cell.seed;
    TrainConfig cfg = base;
    cfg.seed = cell.seed;
    cfg.components = components_of(cell.variant);
    const auto data = generate_dataset(sp);
    const auto heldout = generate_heldout(data, cfg.eval_size, sp.rho);
    cell.final = train(data, heldout, cfg).metrics.final();
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(table.cells.size())));
  if (workers == 1) {
    for (auto& c : table.cells) run_cell(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < table.cells.size(); i += static_cast<std::size_t>(workers)) {
          run_cell(table.cells[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (Variant v : variants) {
    std::vector<double> acc, loss, gap;
    for (const auto& c : table.cells) {
      if (c.variant != v) continue;
      acc.push_back(c.final.acc_at_1);
      loss.push_back(c.final.loss_itc);
      gap.push_back(c.final.modality_gap);
    }
    table.rows.push_back({v, median(acc), median(loss), median(gap)});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Planted-region recovery.

struct RecoveryResult {
  double tpp_iou = 0.0;     ///< mean IoU of the top-scoring window with the relevant patches
  double random_iou = 0.0;  ///< mean IoU of a uniformly placed window of the same size
};

namespace detail {

inline double window_iou(const WindowSpec& w, const PatchLabels& relevant, const PatchGrid& grid) {
  int inter = 0, uni = 0;
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const bool a = w.contains(r, c);
      const bool b = relevant[static_cast<std::size_t>(grid.index(r, c))] != 0;
      inter += a && b;
      uni += a || b;
    }
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace detail

/**
 * For each example, the window of the relevant region's size with the highest
 * TPP score sum is compared with the relevant patches; the baseline averages
 * IoU over every placement of that window exactly.
 */
inline RecoveryResult tpp_recovery(const TrainedModel& m, const ToyDataset& data) {
  RecoveryResult r;
  const auto& grid = data.grid;
  for (const auto& ex : data.examples) {
    const auto text = m.encoder.encode_caption(ex.caption);
    const auto map = tpp_forward(m.tpp, grid, detail::patch_embeddings(m.encoder, ex.patches), text);
    const int h = ex.relevant_window.h, w = ex.relevant_window.w;
    const auto sums = window_sums(map, h, w);
    const auto best = detail::extreme_window(sums, h, w, true);
    r.tpp_iou += detail::window_iou(best, ex.relevant, grid);
    double base = 0.0;
    for (int i = 0; i + h <= grid.rows(); ++i) {
      for (int j = 0; j + w <= grid.cols(); ++j) base += detail::window_iou({i, j, h, w}, ex.relevant, grid);
    }
    r.random_iou += base / static_cast<double>((grid.rows() - h + 1) * (grid.cols() - w + 1));
  }
  r.tpp_iou /= static_cast<double>(data.examples.size());
  r.random_iou /= static_cast<double>(data.examples.size());
  return r;
}

}  // namespace timix

#endif  // TIMIX_TOYTRAIN_HPP_
