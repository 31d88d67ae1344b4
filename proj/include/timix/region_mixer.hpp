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

#ifndef TIMIX_REGION_MIXER_HPP_
#define TIMIX_REGION_MIXER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "timix/error.hpp"
#include "timix/linalg.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/rng.hpp"
#include "timix/score_map.hpp"

namespace timix {

inline constexpr double kGammaLow = 0.25;
inline constexpr double kGammaHigh = 0.75;

/// Side ratio of the mixed window relative to the grid.
class SideRatio {
 public:
  explicit SideRatio(double gamma, double lo = kGammaLow, double hi = kGammaHigh) : gamma_(gamma) {
    if (!(gamma >= lo && gamma <= hi)) {
      raise(ErrorKind::InvalidArgument,
            "side ratio " + std::to_string(gamma) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  double value() const noexcept { return gamma_; }

 private:
  double gamma_;
};

inline SideRatio sample_side_ratio(Rng& rng, double lo = kGammaLow, double hi = kGammaHigh) {
  return SideRatio(rng.uniform(lo, hi), lo, hi);
}

/// Window size (h, w) in patches: floor(gamma * rows) x floor(gamma * cols), at least 1.
inline std::pair<int, int> window_extent(const PatchGrid& grid, SideRatio gamma) {
  const int h = std::max(1, static_cast<int>(std::floor(gamma.value() * grid.rows())));
  const int w = std::max(1, static_cast<int>(std::floor(gamma.value() * grid.cols())));
  return {std::min(h, grid.rows()), std::min(w, grid.cols())};
}

/**
 * Rectangular patch window stored by its top-left cell. The centre form
 * (a, b) = (row + h/2, col + w/2) addresses the same cells through the
 * offsets p - floor(h/2), q - floor(w/2).
 */
struct WindowSpec {
  int row = 0;
  int col = 0;
  int h = 1;
  int w = 1;

  int center_row() const noexcept { return row + h / 2; }
  int center_col() const noexcept { return col + w / 2; }

  static WindowSpec from_center(int a, int b, int h, int w) { return {a - h / 2, b - w / 2, h, w}; }

  bool contains(int r, int c) const noexcept { return r >= row && r < row + h && c >= col && c < col + w; }

  bool operator==(const WindowSpec&) const = default;
};

inline void validate_window(const PatchGrid& grid, const WindowSpec& win) {
  if (win.h < 1 || win.w < 1 || win.row < 0 || win.col < 0 || win.row + win.h > grid.rows() ||
      win.col + win.w > grid.cols()) {
    raise(ErrorKind::WindowTooLarge, "window does not fit inside the grid");
  }
}

/// Summed-area table over a rows x cols map with a zero top row and left column.
class SummedAreaTable {
 public:
  SummedAreaTable(std::span<const double> values, int rows, int cols)
      : rows_(rows), cols_(cols), table_(static_cast<std::size_t>((rows + 1) * (cols + 1)), 0.0) {
    const auto stride = static_cast<std::size_t>(cols + 1);
    for (int r = 0; r < rows; ++r) {
      double row_sum = 0.0;
      for (int c = 0; c < cols; ++c) {
        row_sum += values[static_cast<std::size_t>(r * cols + c)];
        table_[(r + 1) * stride + c + 1] = row_sum + table_[r * stride + c + 1];
      }
    }
  }

  /// Sum over rows [r, r+h) and columns [c, c+w).
  double block_sum(int r, int c, int h, int w) const {
    const auto stride = static_cast<std::size_t>(cols_ + 1);
    const std::size_t r0 = r, c0 = c, r1 = r + h, c1 = c + w;
    return table_[r1 * stride + c1] - table_[r0 * stride + c1] - table_[r1 * stride + c0] + table_[r0 * stride + c0];
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

 private:
  int rows_;
  int cols_;
  std::vector<double> table_;
};

/// Totals of every h x w window (stride 1), indexed by top-left cell.
inline Matrix window_sums(const ScoreMap& map, int h, int w) {
  const int rows = map.grid.rows();
  const int cols = map.grid.cols();
  if (h < 1 || w < 1 || h > rows || w > cols) {
    raise(ErrorKind::WindowTooLarge, std::to_string(h) + "x" + std::to_string(w) + " window on " +
                                         std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  if (map.scores.size() != static_cast<std::size_t>(rows * cols)) {
    raise(ErrorKind::LengthMismatch, "score map length does not match grid");
  }
  const SummedAreaTable sat(map.scores, rows, cols);
  Matrix out(static_cast<std::size_t>(rows - h + 1), static_cast<std::size_t>(cols - w + 1));
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) = sat.block_sum(static_cast<int>(r), static_cast<int>(c), h, w);
    }
  }
  return out;
}

namespace detail {

/**
 * First row-major position whose total lies within rounding distance of the
 * extreme. Summed-area differences round differently per position, so exact
 * ties in the underlying scores are resolved to the smallest index.
 */
inline WindowSpec extreme_window(const Matrix& sums, int h, int w, bool maximize) {
  double best = sums.data.front();
  double scale = 1.0;
  for (double v : sums.data) {
    best = maximize ? std::max(best, v) : std::min(best, v);
    scale = std::max(scale, std::abs(v));
  }
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (std::size_t i = 0; i < sums.data.size(); ++i) {
    if (std::abs(sums.data[i] - best) <= tol) {
      return WindowSpec{static_cast<int>(i / sums.cols), static_cast<int>(i % sums.cols), h, w};
    }
  }
  return WindowSpec{0, 0, h, w};
}

}  // namespace detail

/// Windows chosen for one mix: least text-relevant in the target, most in the source.
struct WindowPair {
  WindowSpec target;
  WindowSpec source;
};

inline WindowPair select_windows(const ScoreMap& target_map, const ScoreMap& source_map, SideRatio gamma) {
  if (!(target_map.grid == source_map.grid)) raise(ErrorKind::ShapeMismatch, "score maps use different grids");
  const auto [h, w] = window_extent(target_map.grid, gamma);
  const Matrix tgt = window_sums(target_map, h, w);
  const Matrix src = window_sums(source_map, h, w);
  return {detail::extreme_window(tgt, h, w, false), detail::extreme_window(src, h, w, true)};
}

/// Area-proportional soft labels for a mix on this grid.
struct SoftLabels {
  double s_tgt = 1.0;  ///< weight of the target image's caption
  double s_src = 0.0;  ///< weight of the source image's caption
};

inline SoftLabels soft_labels(const PatchGrid& grid, SideRatio gamma) {
  const auto [h, w] = window_extent(grid, gamma);
  const long long p = grid.patch();
  const double s_src = static_cast<double>(static_cast<long long>(h) * w * p * p) /
                       static_cast<double>(static_cast<long long>(grid.height()) * grid.width());
  return {1.0 - s_src, s_src};
}

struct MixRecipe {
  double gamma = 0.5;
  WindowSpec target_window;
  WindowSpec source_window;
  double s_src = 0.0;
  double s_tgt = 1.0;

  bool operator==(const MixRecipe&) const = default;
};

inline MixRecipe make_recipe(const PatchGrid& grid, SideRatio gamma, const WindowSpec& target,
                             const WindowSpec& source) {
  validate_window(grid, target);
  validate_window(grid, source);
  const auto [h, w] = window_extent(grid, gamma);
  if (target.h != h || target.w != w || source.h != h || source.w != w) {
    raise(ErrorKind::ShapeMismatch, "window extents do not match the side ratio");
  }
  const SoftLabels s = soft_labels(grid, gamma);
  return MixRecipe{gamma.value(), target, source, s.s_src, s.s_tgt};
}

/// Text-aware recipe: target window from the target map's minimum, source from the source map's maximum.
inline MixRecipe text_aware_recipe(const ScoreMap& target_map, const ScoreMap& source_map, SideRatio gamma) {
  const auto wins = select_windows(target_map, source_map, gamma);
  return make_recipe(target_map.grid, gamma, wins.target, wins.source);
}

/// CutMix-style recipe: both windows placed uniformly at random.
inline MixRecipe random_recipe(const PatchGrid& grid, SideRatio gamma, Rng& rng) {
  const auto [h, w] = window_extent(grid, gamma);
  WindowSpec tgt{static_cast<int>(rng.integer(0, grid.rows() - h)), static_cast<int>(rng.integer(0, grid.cols() - w)), h, w};
  WindowSpec src{static_cast<int>(rng.integer(0, grid.rows() - h)), static_cast<int>(rng.integer(0, grid.cols() - w)), h, w};
  return make_recipe(grid, gamma, tgt, src);
}

// ---------------------------------------------------------------------------
// Images

/// H x W x C interleaved pixel array.
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  T& at(int y, int x, int ch) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  const T& at(int y, int x, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }

  bool operator==(const Image&) const = default;
};

/// N x D patch-feature array, row-major over the grid.
using PatchFeatures = std::vector<Embedding>;

/**
 * Copy of `target` whose target-window pixel footprint is replaced by the
 * source-window footprint of `source`.
 */
template <typename T>
Image<T> composite(const Image<T>& target, const Image<T>& source, const PatchGrid& grid, const MixRecipe& recipe) {
  if (target.height != grid.height() || target.width != grid.width() || source.height != target.height ||
      source.width != target.width || source.channels != target.channels) {
    raise(ErrorKind::ShapeMismatch, "images do not share the grid's shape");
  }
  validate_window(grid, recipe.target_window);
  validate_window(grid, recipe.source_window);
  const int p = grid.patch();
  const auto& tw = recipe.target_window;
  const auto& sw = recipe.source_window;
  Image<T> out = target;
  const auto run = static_cast<std::size_t>(tw.w * p * target.channels);
  for (int dy = 0; dy < tw.h * p; ++dy) {
    const T* src = &source.at(sw.row * p + dy, sw.col * p, 0);
    T* dst = &out.at(tw.row * p + dy, tw.col * p, 0);
    std::copy(src, src + run, dst);
  }
  return out;
}

/// Feature-mode compositing: patch vectors are moved instead of pixels.
inline PatchFeatures composite(const PatchFeatures& target, const PatchFeatures& source, const PatchGrid& grid,
                               const MixRecipe& recipe) {
  const auto n = static_cast<std::size_t>(grid.size());
  if (target.size() != n || source.size() != n) raise(ErrorKind::ShapeMismatch, "feature grids differ in size");
  validate_window(grid, recipe.target_window);
  validate_window(grid, recipe.source_window);
  const auto& tw = recipe.target_window;
  const auto& sw = recipe.source_window;
  PatchFeatures out = target;
  for (int dr = 0; dr < tw.h; ++dr) {
    for (int dc = 0; dc < tw.w; ++dc) {
      out[static_cast<std::size_t>(grid.index(tw.row + dr, tw.col + dc))] =
          source[static_cast<std::size_t>(grid.index(sw.row + dr, sw.col + dc))];
    }
  }
  return out;
}

/// Both mixes of a pair. `xy` uses x as target and y as source; `yx` swaps roles.
template <typename ImageT>
struct MixedPair {
  ImageT xy;
  ImageT yx;
  MixRecipe recipe_xy;
  MixRecipe recipe_yx;
};

/**
 * Mixes a pair both ways with one shared side ratio, so each caption's two
 * soft labels across the pair sum to one.
 */
template <typename ImageT>
MixedPair<ImageT> mix_pair(const ImageT& image_x, const ScoreMap& map_x, const ImageT& image_y, const ScoreMap& map_y,
                           SideRatio gamma) {
  const MixRecipe xy = text_aware_recipe(map_x, map_y, gamma);
  const MixRecipe yx = text_aware_recipe(map_y, map_x, gamma);
  return {composite(image_x, image_y, map_x.grid, xy), composite(image_y, image_x, map_x.grid, yx), xy, yx};
}

/// Random disjoint pairing of a batch of even size: (perm[0], perm[1]), (perm[2], perm[3]), ...
inline std::vector<std::pair<std::size_t, std::size_t>> random_pairing(std::size_t batch, Rng& rng) {
  if (batch < 2 || batch % 2 != 0) raise(ErrorKind::BatchTooSmall, "pairing needs an even batch of at least 2");
  std::vector<std::size_t> perm(batch);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < batch; i += 2) pairs.emplace_back(perm[i], perm[i + 1]);
  return pairs;
}

/// One output of batch mixing: target/source indices into the batch and the recipe used.
struct MixedSample {
  std::size_t target = 0;
  std::size_t source = 0;
  std::size_t pair = 0;
  MixRecipe recipe;
};

/**
 * Mixes every pair of a batch both ways, producing one mixed sample per input
 * image. Side ratios come from `rng`, one per pair.
 */
template <typename ImageT>
std::vector<std::pair<ImageT, MixedSample>> mix_batch(std::span<const ImageT> images, std::span<const ScoreMap> maps,
                                                      Rng& rng, double gamma_lo = kGammaLow,
                                                      double gamma_hi = kGammaHigh) {
  if (images.size() != maps.size()) raise(ErrorKind::LengthMismatch, "one score map per image required");
  const auto pairs = random_pairing(images.size(), rng);
  std::vector<std::pair<ImageT, MixedSample>> out;
  out.reserve(images.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [x, y] = pairs[k];
    const SideRatio gamma = sample_side_ratio(rng, gamma_lo, gamma_hi);
    auto mixed = mix_pair(images[x], maps[x], images[y], maps[y], gamma);
    out.push_back({std::move(mixed.xy), MixedSample{x, y, k, mixed.recipe_xy}});
    out.push_back({std::move(mixed.yx), MixedSample{y, x, k, mixed.recipe_yx}});
  }
  return out;
}

}  // namespace timix

#endif  // TIMIX_REGION_MIXER_HPP_
