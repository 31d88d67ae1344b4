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

#ifndef TIMIX_PATCH_GEOMETRY_HPP_
#define TIMIX_PATCH_GEOMETRY_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "timix/error.hpp"

namespace timix {

/**
 * Partition of an H x W image into non-overlapping P x P patches.
 *
 * Patches are indexed row-major: patch (r, c) has index r * cols + c and covers
 * the half-open pixel rectangle [c*P, (c+1)*P) x [r*P, (r+1)*P).
 */
class PatchGrid {
 public:
  static PatchGrid make(int height, int width, int patch) {
    if (height <= 0 || width <= 0 || patch <= 0) {
      raise(ErrorKind::InvalidArgument, "image and patch sizes must be positive");
    }
    if (height % patch != 0 || width % patch != 0) {
      raise(ErrorKind::NonDivisible, "patch size " + std::to_string(patch) + " does not divide " +
                                         std::to_string(height) + "x" + std::to_string(width));
    }
    PatchGrid g(height, width, patch);
    if (g.rows() < 2 || g.cols() < 2) {
      raise(ErrorKind::GridTooSmall, "grid " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                                         " must be at least 2x2");
    }
    return g;
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int patch() const noexcept { return patch_; }
  int rows() const noexcept { return height_ / patch_; }
  int cols() const noexcept { return width_ / patch_; }
  int size() const noexcept { return rows() * cols(); }

  int index(int row, int col) const {
    if (row < 0 || col < 0 || row >= rows() || col >= cols()) {
      raise(ErrorKind::IndexOutOfRange, "patch (" + std::to_string(row) + "," + std::to_string(col) +
                                            ") outside " + std::to_string(rows()) + "x" +
                                            std::to_string(cols()) + " grid");
    }
    return row * cols() + col;
  }

  bool operator==(const PatchGrid&) const = default;

 private:
  PatchGrid(int h, int w, int p) : height_(h), width_(w), patch_(p) {}

  int height_;
  int width_;
  int patch_;
};

inline PatchGrid make_grid(int height, int width, int patch) { return PatchGrid::make(height, width, patch); }

inline int patch_index(const PatchGrid& grid, int row, int col) { return grid.index(row, col); }

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool operator==(const BoundingBox&) const = default;
};

inline void validate_box(const PatchGrid& grid, const BoundingBox& box) {
  if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1 || box.x1 > grid.width() ||
      box.y1 > grid.height()) {
    raise(ErrorKind::OutOfBounds, "box (" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                                      std::to_string(box.x1) + "," + std::to_string(box.y1) +
                                      ") invalid for " + std::to_string(grid.width()) + "x" +
                                      std::to_string(grid.height()) + " image");
  }
}

/// Binary per-patch labels, row-major, one entry per grid patch.
using PatchLabels = std::vector<std::uint8_t>;

/**
 * Label 1 for every patch whose pixel rectangle has a positive-area
 * intersection with the box. A box edge lying exactly on a patch boundary
 * does not mark the neighbouring patch.
 */
inline PatchLabels box_to_patch_labels(const PatchGrid& grid, const BoundingBox& box) {
  validate_box(grid, box);
  const int p = grid.patch();
  // Patch c overlaps [x0, x1) iff c*P < x1 and (c+1)*P > x0.
  const int c_lo = box.x0 / p;
  const int c_hi = (box.x1 - 1) / p;
  const int r_lo = box.y0 / p;
  const int r_hi = (box.y1 - 1) / p;
  PatchLabels labels(static_cast<std::size_t>(grid.size()), 0);
  for (int r = r_lo; r <= r_hi; ++r) {
    for (int c = c_lo; c <= c_hi; ++c) {
      labels[static_cast<std::size_t>(grid.index(r, c))] = 1;
    }
  }
  return labels;
}

}  // namespace timix

#endif  // TIMIX_PATCH_GEOMETRY_HPP_
