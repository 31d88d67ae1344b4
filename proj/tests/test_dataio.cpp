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

#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "timix/dataio.hpp"

namespace timix {
namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("timix_dataio_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RgbImage gradient_image(int h, int w) {
  RgbImage img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<std::uint8_t>(x * 7 + y);
      img.at(y, x, 1) = static_cast<std::uint8_t>(y * 13);
      img.at(y, x, 2) = static_cast<std::uint8_t>((x ^ y) & 0xff);
    }
  }
  return img;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

TEST(Ppm, RoundTripIsExact) {
  const auto img = gradient_image(12, 20);
  std::stringstream ss;
  write_ppm(ss, img);
  EXPECT_EQ(read_ppm(ss), img);
}

TEST(Ppm, HeaderCommentsAreSkipped) {
  std::string data = "P6\n# made by hand\n2 1\n# max\n255\n";
  data += std::string("\x01\x02\x03\x04\x05\x06", 6);
  std::istringstream in(data);
  const auto img = read_ppm(in);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 1);
  EXPECT_EQ(img.at(0, 1, 2), 6);
}

TEST(Ppm, MalformedInputsAreSchemaErrors) {
  for (const std::string bad : {"P3\n2 2\n255\n", "P6\n2 2\n65535\n", "P6\n0 2\n255\n", "P6\n2", "P6\n2 2\n255\nabc"}) {
    std::istringstream in(bad);
    EXPECT_EQ(kind_of([&] { read_ppm(in); }), ErrorKind::SchemaError) << bad;
  }
}

TEST(Ppm, MissingFileAndDimensions) {
  TempDir dir;
  EXPECT_EQ(kind_of([&] { read_ppm(dir.path() / "nope.ppm"); }), ErrorKind::MissingFile);
  write_ppm(dir.path() / "a.ppm", gradient_image(8, 24));
  EXPECT_EQ(ppm_dimensions(dir.path() / "a.ppm"), std::make_pair(24, 8));
  EXPECT_EQ(kind_of([&] { write_ppm(dir.path() / "g.ppm", RgbImage(2, 2, 1)); }), ErrorKind::ShapeMismatch);
}

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_ppm(dir.path() / "a.ppm", gradient_image(32, 48));
    write_ppm(dir.path() / "b.ppm", gradient_image(32, 32));
  }
  fs::path manifest(const std::string& body) {
    const auto p = dir.path() / "manifest.jsonl";
    write_text(p, body);
    return p;
  }
  TempDir dir;
};

TEST_F(ManifestTest, LoadsEntriesInOrder) {
  const auto p = manifest(
      R"({"version":1,"image_id":"a","file":"a.ppm","captions":["x","y"],"boxes":[{"x0":0,"y0":0,"x1":16,"y1":16,"caption":"x"}]})"
      "\n\n"
      R"({"version":1,"image_id":"b","file":"b.ppm","caption":"solo","width":32,"height":32})"
      "\n");
  const auto m = load_manifest(p, 16);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].image_id, "a");
  EXPECT_EQ(m.entries[0].width, 48);
  EXPECT_EQ(m.entries[0].height, 32);
  EXPECT_EQ(m.entries[0].captions, (std::vector<std::string>{"x", "y"}));
  ASSERT_EQ(m.entries[0].boxes.size(), 1u);
  EXPECT_EQ(m.entries[0].boxes[0].box, (BoundingBox{0, 0, 16, 16}));
  EXPECT_EQ(m.entries[1].captions, std::vector<std::string>{"solo"});
  EXPECT_EQ(m.entries[1].file, dir.path() / "b.ppm");
}

TEST_F(ManifestTest, ErrorsCarryKindAndLine) {
  auto expect = [&](const std::string& body, ErrorKind kind, const std::string& tag) {
    const auto p = manifest(body);
    try {
      load_manifest(p, 16);
      ADD_FAILURE() << "accepted: " << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind) << e.what();
      EXPECT_NE(std::string(e.what()).find(tag), std::string::npos) << e.what();
    }
  };
  const std::string ok = R"({"version":1,"image_id":"a","file":"a.ppm"})";
  expect(ok + "\n" + R"({"version":1,"image_id":"c","file":"c.ppm"})", ErrorKind::MissingFile, "manifest.jsonl:2");
  expect(ok + "\n" + R"({"version":2,"image_id":"b","file":"b.ppm"})", ErrorKind::VersionMismatch,
         "manifest.jsonl:2");
  expect(R"({"image_id":"a","file":"a.ppm"})", ErrorKind::SchemaError, "manifest.jsonl:1");
  expect(ok + "\n\n" + R"({"version":1,"file":"b.ppm"})", ErrorKind::SchemaError, "manifest.jsonl:3");
  expect(R"({"version":1,"image_id":"a","file":"a.ppm",)", ErrorKind::SchemaError, "manifest.jsonl:1");
  expect(R"({"version":1,"image_id":"a","file":"a.ppm","width":40})", ErrorKind::BadDimensions, "manifest.jsonl:1");
  expect(R"({"version":1,"image_id":"a","file":"a.ppm","boxes":[{"x0":0,"y0":0,"x1":64,"y1":8}]})",
         ErrorKind::SchemaError, "outside");
  EXPECT_EQ(kind_of([&] { load_manifest(dir.path() / "absent.jsonl", 16); }), ErrorKind::MissingFile);
}

TEST_F(ManifestTest, PatchDivisibilityIsChecked) {
  const auto p = manifest(R"({"version":1,"image_id":"a","file":"a.ppm"})");
  EXPECT_EQ(kind_of([&] { load_manifest(p, 10); }), ErrorKind::BadDimensions);
  // 32 / 32 leaves a single patch row.
  EXPECT_EQ(kind_of([&] { load_manifest(p, 32); }), ErrorKind::BadDimensions);
  EXPECT_EQ(kind_of([&] { load_manifest(p, 0); }), ErrorKind::InvalidArgument);
  EXPECT_NO_THROW(load_manifest(p, 8));
}

TEST(Annotations, RoundTrip) {
  std::vector<Annotation> in{{"img1", 64, 32, {{{0, 0, 16, 16}, "red"}, {{16, 0, 64, 32}, "a \"quoted\" box"}}},
                             {"img2", 32, 32, {}}};
  std::stringstream ss;
  for (const auto& a : in) write_annotation(ss, a);
  const auto out = read_annotations(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].image_id, in[i].image_id);
    EXPECT_EQ(out[i].width, in[i].width);
    EXPECT_EQ(out[i].height, in[i].height);
    EXPECT_EQ(out[i].boxes, in[i].boxes);
  }
}

TEST(Annotations, BadBoxIsRejected) {
  std::istringstream in(R"({"image_id":"x","width":16,"height":16,"boxes":[{"x0":4,"y0":0,"x1":4,"y1":8}]})");
  EXPECT_EQ(kind_of([&] { read_annotations(in, "ann"); }), ErrorKind::SchemaError);
}

TEST(RunConfigIo, JsonRoundTrip) {
  RunConfig c;
  c.height = 64;
  c.width = 128;
  c.patch = 32;
  c.temperature = 0.07;
  c.gamma_lo = 0.2;
  c.seed = std::numeric_limits<std::uint64_t>::max();
  c.strategy = "cutmix";
  c.lr = 0.1 + 0.2;
  const auto back = run_config_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_NO_THROW(back.validate());
}

TEST(RunConfigIo, PartialObjectKeepsDefaults) {
  const auto c = run_config_from_json(Json::parse(R"({"epochs": 5})"));
  EXPECT_EQ(c.epochs, 5);
  EXPECT_EQ(to_json(c)["P"], 16);
}

TEST(RunConfigIo, SchemaViolations) {
  EXPECT_EQ(kind_of([] { run_config_from_json(Json::parse(R"({"tau_typo": 1})")); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { run_config_from_json(Json::parse(R"({"H": "big"})")); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { run_config_from_json(Json::parse(R"([1, 2])")); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { run_config_from_json(Json::parse(R"({"version": 9})")); }), ErrorKind::VersionMismatch);
}

TEST(RunConfigIo, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return kind_of([&] { c.validate(); });
  };
  EXPECT_EQ(bad([](RunConfig& c) { c.width = 250; }), ErrorKind::NonDivisible);
  EXPECT_EQ(bad([](RunConfig& c) { c.temperature = 0; }), ErrorKind::InvalidArgument);
  EXPECT_EQ(bad([](RunConfig& c) { c.gamma_lo = 0.8; }), ErrorKind::InvalidArgument);
  EXPECT_EQ(bad([](RunConfig& c) { c.gamma_hi = 1.0; }), ErrorKind::InvalidArgument);
  EXPECT_EQ(bad([](RunConfig& c) { c.batch_size = 0; }), ErrorKind::InvalidArgument);
  EXPECT_EQ(bad([](RunConfig& c) { c.strategy = "best"; }), ErrorKind::InvalidArgument);
}

TEST(RunConfigIo, LoadFromFile) {
  const auto p = fs::temp_directory_path() / "timix_dataio_cfg.json";
  write_text(p, R"({"version": 1, "seed": 99, "epochs": 3})");
  const auto c = load_run_config(p);
  fs::remove(p);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(kind_of([&] { load_run_config(p); }), ErrorKind::MissingFile);
}

TEST(Seeds, ParseSeed) {
  EXPECT_EQ(parse_seed("0", "s"), 0u);
  EXPECT_EQ(parse_seed("18446744073709551615", "s"), std::numeric_limits<std::uint64_t>::max());
  for (const char* bad : {"", "-1", "1e3", " 4", "0x10", "18446744073709551616"}) {
    EXPECT_EQ(kind_of([&] { parse_seed(bad, "s"); }), ErrorKind::InvalidArgument) << bad;
  }
}

TEST(Seeds, EnvironmentOverridesConfig) {
  RunConfig c;
  c.seed = 5;
  ::unsetenv("TIMIX_SEED");
  EXPECT_FALSE(apply_env_seed(c));
  EXPECT_EQ(c.seed, 5u);
  ::setenv("TIMIX_SEED", "77", 1);
  EXPECT_TRUE(apply_env_seed(c));
  EXPECT_EQ(c.seed, 77u);
  ::setenv("TIMIX_SEED", "seven", 1);
  EXPECT_EQ(kind_of([&] { apply_env_seed(c); }), ErrorKind::InvalidArgument);
  ::unsetenv("TIMIX_SEED");
}

TEST(SpecIo, JsonRoundTrip) {
  SyntheticSpec s;
  s.rho = 0.37;
  s.noise_std = 1.0 / 3.0;
  s.size = 17;
  s.seed = 123456789012345ULL;
  const auto back = synthetic_spec_from_json(Json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(back.noise_std, s.noise_std);
  EXPECT_EQ(kind_of([] { synthetic_spec_from_json(Json::parse(R"({"rows": 3})")); }), ErrorKind::SchemaError);
}

TEST(MixedRecords, RoundTripIsBitExact) {
  std::vector<MixedRecord> recs{{0, 0.1, {0, 0, 2, 3}, {4, 5, 2, 3}, 0.123456789, 1.0 / 3.0, 9},
                                {7, 0.5, {1, 1, 1, 1}, {0, 0, 1, 1}, 0.0, 5e-324, 18446744073709551615ULL}};
  std::stringstream ss;
  for (const auto& r : recs) write_mixed_record(ss, r);
  EXPECT_EQ(read_mixed_records(ss), recs);
}

TEST(MixedRecords, ToRecordCopiesRecipe) {
  MixRecipe r;
  r.gamma = 0.25;
  r.target_window = {1, 2, 3, 4};
  r.source_window = {0, 0, 3, 4};
  r.s_src = 0.75;
  r.s_tgt = 0.25;
  const auto rec = to_record(r, 3, 11);
  EXPECT_EQ(rec.pair_id, 3u);
  EXPECT_EQ(rec.seed, 11u);
  EXPECT_EQ(rec.target_window, r.target_window);
  EXPECT_EQ(rec.source_window, r.source_window);
  EXPECT_EQ(rec.s_src, r.s_src);
}

TEST(MixedRecords, AnyBadLineFailsTheWholeRead) {
  std::stringstream ss;
  write_mixed_record(ss, MixedRecord{});
  ss << R"({"version":1,"pair_id":1})" << '\n';
  write_mixed_record(ss, MixedRecord{});
  try {
    read_mixed_records(ss, "mix.jsonl");
    ADD_FAILURE() << "accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
    EXPECT_NE(std::string(e.what()).find("mix.jsonl:2"), std::string::npos);
  }
  std::istringstream future(R"({"version":2})");
  EXPECT_EQ(kind_of([&] { read_mixed_records(future); }), ErrorKind::VersionMismatch);
}

RunMetrics awkward_metrics() {
  RunMetrics m;
  for (int e = 1; e <= 3; ++e) {
    EpochMetrics x;
    x.epoch = e;
    x.loss_total = 1.0 / (3.0 * e);
    x.loss_timix_i2t = 0.1 * e;
    x.loss_timix_t2i = std::nextafter(1.0, 2.0);
    x.loss_pta = e == 1 ? 0.0 : 1e-300;
    x.acc_at_1 = 0.5;
    x.modality_gap = 2.0 / 7.0;
    x.loss_itc = std::log(static_cast<double>(e + 1));
    m.epochs.push_back(x);
  }
  return m;
}

TEST(MetricsCsv, RoundTripIsBitExact) {
  const auto m = awkward_metrics();
  std::stringstream ss;
  write_metrics_csv(ss, m, 42);
  const auto text = ss.str();
  EXPECT_EQ(text.rfind("# timix-metrics version=1 seed=42\n", 0), 0u);
  EXPECT_NE(text.find("epoch,loss_total,loss_timix_i2t,loss_timix_t2i,loss_pta,acc@1,modality_gap"), std::string::npos);
  EXPECT_EQ(read_metrics_csv(ss), m);
}

TEST(MetricsCsv, ColumnOrderDoesNotMatter) {
  std::istringstream in(
      "loss_itc,epoch,loss_total,loss_timix_i2t,loss_timix_t2i,loss_pta,acc@1,modality_gap\n"
      "0.5,1,2,3,4,5,0.25,0.125\n");
  const auto m = read_metrics_csv(in);
  ASSERT_EQ(m.epochs.size(), 1u);
  EXPECT_EQ(m.epochs[0].loss_itc, 0.5);
  EXPECT_EQ(m.epochs[0].modality_gap, 0.125);
}

TEST(MetricsCsv, MalformedFilesAreSchemaErrors) {
  for (const std::string bad : {"", "# only a comment\n", "epoch,loss_total\n1,2\n",
                                "epoch,loss_total,loss_timix_i2t,loss_timix_t2i,loss_pta,acc@1,modality_gap,loss_itc\n"
                                "1,2,3\n",
                                "epoch,loss_total,loss_timix_i2t,loss_timix_t2i,loss_pta,acc@1,modality_gap,loss_itc\n"
                                "1,x,3,4,5,6,7,8\n"}) {
    std::istringstream in(bad);
    EXPECT_EQ(kind_of([&] { read_metrics_csv(in); }), ErrorKind::SchemaError) << bad;
  }
}

TEST(OtherCsv, MiAndAblationHeaders) {
  MiTrialRow r;
  r.trial = 3;
  r.n = 4;
  r.ok = true;
  std::ostringstream mi;
  write_mi_csv(mi, {r}, 7);
  EXPECT_EQ(mi.str().rfind("# timix-verify-mi version=1 seed=7\n"
                           "trial,N,s_x,I_x_rx,I_y_ry,I_x_ry,I_y_rx,L,lhs,rhs,margin,verdict\n3,4,",
                           0),
            0u);
  EXPECT_NE(mi.str().find(",ok\n"), std::string::npos);

  AblationTable t;
  t.cells.push_back({Variant::Full, 1, {}});
  t.rows.push_back({Variant::Full, 0.5, 1.5, 0.25});
  std::ostringstream ab;
  write_ablation_csv(ab, t, 1);
  std::istringstream lines(ab.str());
  std::string l;
  std::vector<std::string> all;
  while (std::getline(lines, l)) all.push_back(l);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[1], "variant,seed,acc@1,loss_itc,modality_gap");
  EXPECT_EQ(all[3].substr(all[3].find(',')), ",median,0.5,1.5,0.25");
}

}  // namespace
}  // namespace timix
