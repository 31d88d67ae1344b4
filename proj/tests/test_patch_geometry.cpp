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

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/rng.hpp"

namespace timix {
namespace {

TEST(PatchGrid, Dimensions) {
  const auto g = make_grid(224, 224, 16);
  EXPECT_EQ(g.rows(), 14);
  EXPECT_EQ(g.cols(), 14);
  EXPECT_EQ(g.size(), 196);
  const auto r = make_grid(64, 96, 32);
  EXPECT_EQ(r.rows(), 2);
  EXPECT_EQ(r.cols(), 3);
}

TEST(PatchGrid, RejectsBadShapes) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind_of([] { make_grid(100, 96, 16); }), ErrorKind::NonDivisible);
  EXPECT_EQ(kind_of([] { make_grid(16, 64, 16); }), ErrorKind::GridTooSmall);
  EXPECT_EQ(kind_of([] { make_grid(0, 64, 16); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { make_grid(64, 64, -4); }), ErrorKind::InvalidArgument);
}

TEST(PatchGrid, IndexIsRowMajor) {
  const auto g = make_grid(48, 64, 16);
  int expected = 0;
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) EXPECT_EQ(patch_index(g, r, c), expected++);
  }
  EXPECT_THROW(patch_index(g, 3, 0), Error);
  EXPECT_THROW(patch_index(g, 0, -1), Error);
}

TEST(BoxLabels, EdgeOnBoundaryDoesNotSpill) {
  const auto g = make_grid(64, 64, 16);
  const auto labels = box_to_patch_labels(g, {16, 16, 32, 32});
  for (int i = 0; i < g.size(); ++i) EXPECT_EQ(labels[i], i == patch_index(g, 1, 1) ? 1 : 0);
}

TEST(BoxLabels, OnePixelOverlapCounts) {
  const auto g = make_grid(64, 64, 16);
  const auto labels = box_to_patch_labels(g, {15, 0, 17, 1});
  EXPECT_EQ(labels[0], 1);
  EXPECT_EQ(labels[1], 1);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 2);
}

TEST(BoxLabels, FullImageMarksEverything) {
  const auto g = make_grid(48, 32, 8);
  const auto labels = box_to_patch_labels(g, {0, 0, 32, 48});
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), g.size());
}

TEST(BoxLabels, InvalidBoxesThrowOutOfBounds) {
  const auto g = make_grid(64, 64, 16);
  for (BoundingBox b : {BoundingBox{0, 0, 0, 10}, BoundingBox{5, 5, 4, 10}, BoundingBox{-1, 0, 4, 4},
                        BoundingBox{0, 0, 65, 4}, BoundingBox{0, 0, 4, 65}}) {
    try {
      box_to_patch_labels(g, b);
      ADD_FAILURE() << "accepted invalid box";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
    }
  }
}

TEST(BoxLabels, MatchesRectangleIntersectionOracle) {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const int p = static_cast<int>(rng.integer(1, 12));
    const auto g = make_grid(p * static_cast<int>(rng.integer(2, 12)), p * static_cast<int>(rng.integer(2, 12)), p);
    const int x0 = static_cast<int>(rng.integer(0, g.width() - 1));
    const int y0 = static_cast<int>(rng.integer(0, g.height() - 1));
    const int x1 = static_cast<int>(rng.integer(x0 + 1, g.width()));
    const int y1 = static_cast<int>(rng.integer(y0 + 1, g.height()));
    ASSERT_EQ(box_to_patch_labels(g, {x0, y0, x1, y1}), oracle::box_labels(g.height(), g.width(), p, x0, y0, x1, y1))
        << "box " << x0 << "," << y0 << "," << x1 << "," << y1 << " patch " << p;
  }
}

// Labelled patches always form one solid rectangle.
TEST(BoxLabels, LabelledSetIsRectangle) {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    const auto g = make_grid(96, 128, 16);
    const int x0 = static_cast<int>(rng.integer(0, 127)), y0 = static_cast<int>(rng.integer(0, 95));
    const auto labels =
        box_to_patch_labels(g, {x0, y0, static_cast<int>(rng.integer(x0 + 1, 128)), static_cast<int>(rng.integer(y0 + 1, 96))});
    int r0 = g.rows(), r1 = -1, c0 = g.cols(), c1 = -1, count = 0;
    for (int r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < g.cols(); ++c) {
        if (!labels[g.index(r, c)]) continue;
        r0 = std::min(r0, r), r1 = std::max(r1, r), c0 = std::min(c0, c), c1 = std::max(c1, c);
        ++count;
      }
    }
    ASSERT_GT(count, 0);
    EXPECT_EQ(count, (r1 - r0 + 1) * (c1 - c0 + 1));
  }
}

}  // namespace
}  // namespace timix
