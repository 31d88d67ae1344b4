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

#include <cmath>

#include "oracles.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/rng.hpp"
#include "timix/score_map.hpp"

namespace timix {
namespace {

Embedding random_vec(Rng& rng, int d) {
  Embedding v(static_cast<std::size_t>(d));
  for (auto& x : v) x = rng.normal();
  return v;
}

// Direct evaluation of the three-layer perceptron from its weights.
double reference_score(const TppModel& m, const Embedding& patch, const Embedding& text) {
  const int d = m.dim(), h = m.hidden();
  std::vector<double> x(patch);
  x.insert(x.end(), text.begin(), text.end());
  std::vector<double> h1(static_cast<std::size_t>(h)), h2(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    double s = m.b1()[r];
    for (int c = 0; c < 2 * d; ++c) s += m.w1()(r, c) * x[c];
    h1[r] = s > 0 ? s : 0;
  }
  for (int r = 0; r < h; ++r) {
    double s = m.b2()[r];
    for (int c = 0; c < h; ++c) s += m.w2()(r, c) * h1[c];
    h2[r] = s > 0 ? s : 0;
  }
  double z = m.b3();
  for (int c = 0; c < h; ++c) z += m.w3()[c] * h2[c];
  return 1.0 / (1.0 + std::exp(-z));
}

TEST(Tpp, ForwardMatchesReference) {
  Rng rng(3);
  const TppModel m(5, 7, 11);
  const auto grid = make_grid(48, 32, 16);
  std::vector<Embedding> patches;
  for (int i = 0; i < grid.size(); ++i) patches.push_back(random_vec(rng, 5));
  const auto text = random_vec(rng, 5);
  const auto map = tpp_forward(m, grid, patches, text);
  ASSERT_EQ(map.scores.size(), 6u);
  for (int i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(map.scores[i], reference_score(m, patches[i], text), 1e-14);
    EXPECT_GT(map.scores[i], 0.0);
    EXPECT_LT(map.scores[i], 1.0);
  }
  EXPECT_EQ(map.at(1, 1), map.scores[3]);
}

TEST(Tpp, SeededInitIsDeterministic) {
  EXPECT_EQ(TppModel(4, 6, 99).flatten(), TppModel(4, 6, 99).flatten());
  EXPECT_NE(TppModel(4, 6, 99).flatten(), TppModel(4, 6, 100).flatten());
  const auto flat = TppModel(4, 6, 99).flatten();
  EXPECT_EQ(flat.size(), TppModel(4, 6, 99).parameter_count());
  EXPECT_EQ(flat.size(), 6u * 8 + 6 + 36 + 6 + 6 + 1);
  TppModel z = TppModel::zeros(4, 6);
  z.unflatten(flat);
  EXPECT_EQ(z.flatten(), flat);
}

TEST(Tpp, DimensionErrors) {
  const TppModel m(4, 4, 1);
  const auto grid = make_grid(32, 32, 16);
  std::vector<Embedding> patches(4, Embedding(4, 0.0));
  EXPECT_THROW(tpp_forward(m, grid, patches, Embedding(3, 0.0)), Error);
  patches.pop_back();
  EXPECT_THROW(tpp_forward(m, grid, patches, Embedding(4, 0.0)), Error);
  EXPECT_THROW(TppModel(0, 4, 1), Error);
}

TEST(PtaLoss, KnownValue) {
  const std::vector<double> s{0.9, 0.2, 0.5};
  const PatchLabels y{1, 0, 1};
  const double want = -(std::log(0.9) + std::log(0.8) + std::log(0.5)) / 3.0;
  EXPECT_NEAR(pta_loss(s, y), want, 1e-15);
}

TEST(PtaLoss, ClampedAndNonNegative) {
  const std::vector<double> s{0.0, 1.0};
  const double loss = pta_loss(s, PatchLabels{1, 0});
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(kScoreClamp), 1e-9);
  EXPECT_GE(pta_loss(std::vector<double>{1.0, 0.0}, PatchLabels{1, 0}), 0.0);
}

TEST(PtaLoss, RejectsBadInput) {
  auto kind_of = [](const std::vector<double>& s, const PatchLabels& y) {
    try {
      pta_loss(s, y);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind_of({0.5}, {1, 0}), ErrorKind::LengthMismatch);
  EXPECT_EQ(kind_of({NAN, 0.5}, {1, 0}), ErrorKind::NonFiniteScore);
  EXPECT_EQ(kind_of({1.5, 0.5}, {1, 0}), ErrorKind::NonFiniteScore);
}

TEST(PtaGrad, MatchesFiniteDifferences) {
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 3, h = 4;
    const TppModel model(d, h, static_cast<std::uint64_t>(trial));
    std::vector<Embedding> patches;
    PatchLabels labels;
    for (int i = 0; i < 5; ++i) {
      patches.push_back(random_vec(rng, d));
      labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    const auto text = random_vec(rng, d);
    const auto g = pta_grad(model, patches, text, labels);
    EXPECT_NEAR(g.loss, pta_loss(tpp_scores(model, patches, text), labels), 1e-14);
    const auto num = oracle::numeric_gradient(
        [&](const std::vector<double>& p) {
          TppModel m = model;
          m.unflatten(p);
          return pta_loss(tpp_scores(m, patches, text), labels);
        },
        model.flatten());
    EXPECT_LE(oracle::relative_error(g.params, num), 1e-5);
    const auto num_text = oracle::numeric_gradient(
        [&](const std::vector<double>& t) { return pta_loss(tpp_scores(model, patches, t), labels); }, text);
    EXPECT_LE(oracle::relative_error(g.text, num_text), 1e-5);
  }
}

TEST(PtaTrain, StepsReduceLoss) {
  Rng rng(5);
  TppModel m(4, 8, 2);
  std::vector<PtaExample> batch;
  for (int i = 0; i < 8; ++i) {
    PtaExample ex;
    const auto text = random_vec(rng, 4);
    for (int k = 0; k < 6; ++k) {
      const bool on = k < 2;
      Embedding p = random_vec(rng, 4);
      if (on) {
        for (int j = 0; j < 4; ++j) p[j] = text[j] + 0.1 * p[j];
      }
      ex.patches.push_back(p);
      ex.labels.push_back(on ? 1 : 0);
    }
    ex.text = text;
    batch.push_back(ex);
  }
  const double first = pta_train_step(m, batch, 0.5);
  double last = first;
  for (int s = 0; s < 300; ++s) last = pta_train_step(m, batch, 0.5);
  EXPECT_LT(last, 0.5 * first);
  const auto before = m.flatten();
  pta_train_step(m, batch, 0.0);
  EXPECT_EQ(m.flatten(), before);
  EXPECT_THROW(pta_train_step(m, {}, 0.1), Error);
  EXPECT_THROW(pta_train_step(m, batch, -1.0), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const TppModel m(6, 5, 1234);
  const auto back = load_tpp_checkpoint(save_tpp_checkpoint(m));
  EXPECT_EQ(back.flatten(), m.flatten());
  EXPECT_EQ(back.seed(), 1234u);
  EXPECT_EQ(back.dim(), 6);
  EXPECT_EQ(back.hidden(), 5);
}

TEST(Checkpoint, Errors) {
  auto kind_of = [](const std::string& text) {
    try {
      load_tpp_checkpoint(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind_of("not json"), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of(R"({"format":"other","version":1})"), ErrorKind::SchemaError);
  auto j = nlohmann::json::parse(save_tpp_checkpoint(TppModel(2, 2, 0)));
  j["version"] = 2;
  EXPECT_EQ(kind_of(j.dump()), ErrorKind::VersionMismatch);
  j["version"] = 1;
  j["w1"] = std::vector<double>{1.0};
  EXPECT_EQ(kind_of(j.dump()), ErrorKind::SchemaError);
  EXPECT_THROW(read_tpp_checkpoint("/nonexistent/tpp.json"), Error);
}

}  // namespace
}  // namespace timix
