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

// Picks mixing windows from two hand-made score maps and pastes the source
// window into the target image.

#include <iostream>

#include "timix/region_mixer.hpp"

int main() {
  using namespace timix;
  const auto grid = PatchGrid::make(64, 64, 16);

  // Target: the caption talks about the top-left corner. Source: bottom-right.
  std::vector<double> tgt(16, 0.1), src(16, 0.1);
  tgt[grid.index(0, 0)] = tgt[grid.index(0, 1)] = 0.9;
  src[grid.index(3, 3)] = src[grid.index(2, 3)] = 0.9;
  const auto recipe = text_aware_recipe(make_score_map(grid, tgt), make_score_map(grid, src), SideRatio(0.5));

  std::cout << "window " << recipe.target_window.h << "x" << recipe.target_window.w << " patches\n"
            << "target window at (" << recipe.target_window.row << "," << recipe.target_window.col << ")\n"
            << "source window at (" << recipe.source_window.row << "," << recipe.source_window.col << ")\n"
            << "caption weights: target " << recipe.s_tgt << ", source " << recipe.s_src << '\n';

  Image<float> a(64, 64, 1, 0.0f), b(64, 64, 1, 1.0f);
  const auto mixed = composite(a, b, grid, recipe);
  double filled = 0;
  for (float v : mixed.pixels) filled += v;
  std::cout << "pixels taken from source: " << filled / static_cast<double>(mixed.pixels.size()) << '\n';
}
