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

#ifndef TIMIX_DATAIO_HPP_
#define TIMIX_DATAIO_HPP_

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "timix/csv.hpp"
#include "timix/error.hpp"
#include "timix/mi_verify.hpp"
#include "timix/patch_geometry.hpp"
#include "timix/region_mixer.hpp"
#include "timix/toytrain.hpp"

namespace timix {

inline constexpr int kFormatVersion = 1;

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace detail {

inline void check_version(const Json& j, const std::string& where) {
  if (!j.contains("version")) raise(ErrorKind::SchemaError, where + ": missing \"version\"");
  if (!j.at("version").is_number_integer()) raise(ErrorKind::SchemaError, where + ": \"version\" must be an integer");
  const int v = j.at("version").get<int>();
  if (v > kFormatVersion || v < 1) {
    raise(ErrorKind::VersionMismatch, where + ": format version " + std::to_string(v) + " is not supported (expected " +
                                          std::to_string(kFormatVersion) + ")");
  }
}

/// Runs `fn`, re-raising JSON type/lookup errors as SchemaError tagged with `where`.
template <typename Fn>
auto with_schema(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::SchemaError, where + ": " + e.what());
  }
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::SchemaError, where + ": malformed JSON (" + e.what() + ")");
  }
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool blank(const std::string& line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PPM (P6) images.

using RgbImage = Image<std::uint8_t>;

namespace detail {

inline std::string ppm_token(std::istream& in, const std::string& where) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  if (tok.empty()) raise(ErrorKind::SchemaError, where + ": truncated PPM header");
  return tok;
}

inline int ppm_int(std::istream& in, const std::string& where) {
  const auto tok = ppm_token(in, where);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (*end != '\0' || v <= 0 || v > (1L << 24)) raise(ErrorKind::SchemaError, where + ": bad PPM header field");
  return static_cast<int>(v);
}

struct PpmHeader {
  int width = 0;
  int height = 0;
};

inline PpmHeader read_ppm_header(std::istream& in, const std::string& where) {
  if (ppm_token(in, where) != "P6") raise(ErrorKind::SchemaError, where + ": not a binary PPM (P6)");
  PpmHeader h;
  h.width = ppm_int(in, where);
  h.height = ppm_int(in, where);
  if (ppm_int(in, where) != 255) raise(ErrorKind::SchemaError, where + ": only maxval 255 is supported");
  return h;
}

}  // namespace detail

/// Width and height from a PPM header without decoding the pixels.
inline std::pair<int, int> ppm_dimensions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::MissingFile, "cannot open " + path.string());
  const auto h = detail::read_ppm_header(in, path.string());
  return {h.width, h.height};
}

inline RgbImage read_ppm(std::istream& in, const std::string& where = "ppm") {
  const auto h = detail::read_ppm_header(in, where);
  RgbImage img(h.height, h.width, 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    raise(ErrorKind::SchemaError, where + ": truncated PPM pixel data");
  }
  return img;
}

inline RgbImage read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::MissingFile, "cannot open " + path.string());
  return read_ppm(in, path.string());
}

inline void write_ppm(std::ostream& out, const RgbImage& img) {
  if (img.channels != 3) raise(ErrorKind::ShapeMismatch, "PPM needs 3 channels");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) raise(ErrorKind::IoError, "failed writing PPM data");
}

inline void write_ppm(const fs::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::IoError, "cannot create " + path.string());
  write_ppm(out, img);
}

// ---------------------------------------------------------------------------
// Dataset manifest (JSONL, one entry per line).

struct AnnotatedBox {
  BoundingBox box;
  std::string caption;
  bool operator==(const AnnotatedBox& o) const {
    return box.x0 == o.box.x0 && box.y0 == o.box.y0 && box.x1 == o.box.x1 && box.y1 == o.box.y1 &&
           caption == o.caption;
  }
};

struct ManifestEntry {
  std::string image_id;
  fs::path file;  ///< resolved against the manifest root
  std::vector<std::string> captions;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedBox> boxes;
};

struct DatasetManifest {
  fs::path root;
  int version = kFormatVersion;
  std::vector<ManifestEntry> entries;
};

namespace detail {

inline std::vector<AnnotatedBox> parse_boxes(const Json& arr, const std::string& where) {
  std::vector<AnnotatedBox> out;
  if (!arr.is_array()) raise(ErrorKind::SchemaError, where + ": \"boxes\" must be an array");
  for (const auto& b : arr) {
    AnnotatedBox ab;
    ab.box = {b.at("x0").get<int>(), b.at("y0").get<int>(), b.at("x1").get<int>(), b.at("y1").get<int>()};
    ab.caption = b.value("caption", std::string{});
    out.push_back(std::move(ab));
  }
  return out;
}

inline void check_box_bounds(const BoundingBox& b, int width, int height, const std::string& where) {
  if (b.x0 < 0 || b.y0 < 0 || b.x0 >= b.x1 || b.y0 >= b.y1 || b.x1 > width || b.y1 > height) {
    raise(ErrorKind::SchemaError, where + ": box (" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                                      std::to_string(b.x1) + "," + std::to_string(b.y1) + ") outside " +
                                      std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

inline std::string line_tag(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace detail

/**
 * Loads and validates a manifest. Entry order equals line order. Every
 * referenced image must exist, be a P6 PPM whose size matches any declared
 * width/height, and divide into `patch`-sized patches.
 */
inline DatasetManifest load_manifest(const fs::path& path, int patch) {
  if (patch <= 0) raise(ErrorKind::InvalidArgument, "patch size must be positive");
  std::ifstream in(path);
  if (!in) raise(ErrorKind::MissingFile, "cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto where = detail::line_tag(path, lineno);
    const Json j = detail::parse_json(line, where);
    detail::check_version(j, where);
    ManifestEntry e = detail::with_schema(where, [&] {
      ManifestEntry e;
      e.image_id = j.at("image_id").get<std::string>();
      e.file = m.root / j.at("file").get<std::string>();
      if (j.contains("captions")) {
        e.captions = j.at("captions").get<std::vector<std::string>>();
      } else if (j.contains("caption")) {
        e.captions = {j.at("caption").get<std::string>()};
      }
      e.width = j.value("width", 0);
      e.height = j.value("height", 0);
      if (j.contains("boxes")) e.boxes = detail::parse_boxes(j.at("boxes"), where);
      return e;
    });
    if (!fs::exists(e.file)) raise(ErrorKind::MissingFile, where + ": image file " + e.file.string() + " not found");
    const auto [w, h] = ppm_dimensions(e.file);
    if ((e.width && e.width != w) || (e.height && e.height != h)) {
      raise(ErrorKind::BadDimensions, where + ": declared size differs from the image header");
    }
    e.width = w;
    e.height = h;
    if (w % patch != 0 || h % patch != 0) {
      raise(ErrorKind::BadDimensions, where + ": image " + std::to_string(h) + "x" + std::to_string(w) +
                                          " is not divisible by P=" + std::to_string(patch));
    }
    if (w / patch < 2 || h / patch < 2) raise(ErrorKind::BadDimensions, where + ": image smaller than a 2x2 patch grid");
    for (const auto& b : e.boxes) detail::check_box_bounds(b.box, w, h, where);
    m.entries.push_back(std::move(e));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Box annotations (JSONL): {image_id, width, height, boxes: [{x0, y0, x1, y1, caption}]}

struct Annotation {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedBox> boxes;
};

inline std::vector<Annotation> read_annotations(std::istream& in, const std::string& name = "annotations") {
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto where = name + ":" + std::to_string(lineno);
    const Json j = detail::parse_json(line, where);
    out.push_back(detail::with_schema(where, [&] {
      Annotation a;
      a.image_id = j.at("image_id").get<std::string>();
      a.width = j.at("width").get<int>();
      a.height = j.at("height").get<int>();
      a.boxes = detail::parse_boxes(j.at("boxes"), where);
      for (const auto& b : a.boxes) detail::check_box_bounds(b.box, a.width, a.height, where);
      return a;
    }));
  }
  return out;
}

inline std::vector<Annotation> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::MissingFile, "cannot open " + path.string());
  return read_annotations(in, path.string());
}

inline void write_annotation(std::ostream& out, const Annotation& a) {
  Json j;
  j["image_id"] = a.image_id;
  j["width"] = a.width;
  j["height"] = a.height;
  j["boxes"] = Json::array();
  for (const auto& b : a.boxes) {
    j["boxes"].push_back({{"x0", b.box.x0}, {"y0", b.box.y0}, {"x1", b.box.x1}, {"y1", b.box.y1}, {"caption", b.caption}});
  }
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
  int height = 256;
  int width = 256;
  int patch = 16;
  int embed_dim = 16;  ///< D
  int hidden_dim = 16; ///< Dh
  double temperature = 0.1;
  double gamma_lo = kGammaLow;
  double gamma_hi = kGammaHigh;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string strategy = "timix";
  int warmup_epochs = 2;
  int epochs = 30;
  double lr = 2.0;

  void validate() const {
    PatchGrid::make(height, width, patch);
    if (embed_dim <= 0 || hidden_dim <= 0) raise(ErrorKind::InvalidArgument, "D and Dh must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) raise(ErrorKind::InvalidArgument, "tau must be positive");
    if (!(gamma_lo >= 0.0 && gamma_hi < 1.0 && gamma_lo < gamma_hi)) {
      raise(ErrorKind::InvalidArgument, "gamma bounds must satisfy 0 <= lo < hi < 1");
    }
    if (batch_size <= 0) raise(ErrorKind::InvalidArgument, "batch_size must be positive");
    if (warmup_epochs < 0 || epochs < 0) raise(ErrorKind::InvalidArgument, "epochs must be non-negative");
    if (!(lr >= 0.0) || !std::isfinite(lr)) raise(ErrorKind::InvalidArgument, "lr must be finite and >= 0");
    parse_strategy(strategy);
  }
};

inline Json to_json(const RunConfig& c) {
  Json j;
  j["version"] = kFormatVersion;
  j["H"] = c.height;
  j["W"] = c.width;
  j["P"] = c.patch;
  j["D"] = c.embed_dim;
  j["Dh"] = c.hidden_dim;
  j["tau"] = c.temperature;
  j["gamma_lo"] = c.gamma_lo;
  j["gamma_hi"] = c.gamma_hi;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["strategy"] = c.strategy;
  j["warmup_epochs"] = c.warmup_epochs;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  return j;
}

/// Keys absent from `j` keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const Json& j, const std::string& where = "config") {
  if (!j.is_object()) raise(ErrorKind::SchemaError, where + ": config must be a JSON object");
  if (j.contains("version")) detail::check_version(j, where);
  RunConfig c;
  detail::with_schema(where, [&] {
    for (const auto& [key, val] : j.items()) {
      if (key == "version") continue;
      else if (key == "H") c.height = val.get<int>();
      else if (key == "W") c.width = val.get<int>();
      else if (key == "P") c.patch = val.get<int>();
      else if (key == "D") c.embed_dim = val.get<int>();
      else if (key == "Dh") c.hidden_dim = val.get<int>();
      else if (key == "tau") c.temperature = val.get<double>();
      else if (key == "gamma_lo") c.gamma_lo = val.get<double>();
      else if (key == "gamma_hi") c.gamma_hi = val.get<double>();
      else if (key == "batch_size") c.batch_size = val.get<int>();
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "strategy") c.strategy = val.get<std::string>();
      else if (key == "warmup_epochs") c.warmup_epochs = val.get<int>();
      else if (key == "epochs") c.epochs = val.get<int>();
      else if (key == "lr") c.lr = val.get<double>();
      else raise(ErrorKind::SchemaError, where + ": unknown key \"" + key + "\"");
    }
    return 0;
  });
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(detail::parse_json(detail::read_text(path), path.string()), path.string());
}

inline std::uint64_t parse_seed(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    raise(ErrorKind::InvalidArgument, what + " must be a non-negative integer, got '" + s + "'");
  }
  errno = 0;
  const auto v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) raise(ErrorKind::InvalidArgument, what + " is out of range");
  return v;
}

/// TIMIX_SEED, when set, replaces the configured seed.
inline bool apply_env_seed(RunConfig& c) {
  const char* env = std::getenv("TIMIX_SEED");
  if (!env) return false;
  c.seed = parse_seed(env, "TIMIX_SEED");
  return true;
}

inline Json to_json(const SyntheticSpec& s) {
  Json j;
  j["version"] = kFormatVersion;
  j["H"] = s.height;
  j["W"] = s.width;
  j["P"] = s.patch;
  j["concepts"] = s.concepts;
  j["feature_dim"] = s.feature_dim;
  j["caption_size"] = s.caption_size;
  j["distractors"] = s.distractors;
  j["max_region_side"] = s.max_region_side;
  j["noise_std"] = s.noise_std;
  j["background"] = s.background;
  j["rho"] = s.rho;
  j["size"] = s.size;
  j["seed"] = s.seed;
  return j;
}

inline SyntheticSpec synthetic_spec_from_json(const Json& j, const std::string& where = "spec") {
  if (!j.is_object()) raise(ErrorKind::SchemaError, where + ": spec must be a JSON object");
  if (j.contains("version")) detail::check_version(j, where);
  SyntheticSpec s;
  detail::with_schema(where, [&] {
    for (const auto& [key, val] : j.items()) {
      if (key == "version") continue;
      else if (key == "H") s.height = val.get<int>();
      else if (key == "W") s.width = val.get<int>();
      else if (key == "P") s.patch = val.get<int>();
      else if (key == "concepts") s.concepts = val.get<int>();
      else if (key == "feature_dim") s.feature_dim = val.get<int>();
      else if (key == "caption_size") s.caption_size = val.get<int>();
      else if (key == "distractors") s.distractors = val.get<int>();
      else if (key == "max_region_side") s.max_region_side = val.get<int>();
      else if (key == "noise_std") s.noise_std = val.get<double>();
      else if (key == "background") s.background = val.get<double>();
      else if (key == "rho") s.rho = val.get<double>();
      else if (key == "size") s.size = val.get<int>();
      else if (key == "seed") s.seed = val.get<std::uint64_t>();
      else raise(ErrorKind::SchemaError, where + ": unknown key \"" + key + "\"");
    }
    return 0;
  });
  return s;
}

inline SyntheticSpec load_synthetic_spec(const fs::path& path) {
  return synthetic_spec_from_json(detail::parse_json(detail::read_text(path), path.string()), path.string());
}

// ---------------------------------------------------------------------------
// Mixed-sample records (JSONL sidecar).

struct MixedRecord {
  std::uint64_t pair_id = 0;
  double gamma = 0.0;
  WindowSpec target_window;
  WindowSpec source_window;
  double s_src = 0.0;
  double s_tgt = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MixedRecord&) const = default;
};

inline MixedRecord to_record(const MixRecipe& r, std::uint64_t pair_id, std::uint64_t seed) {
  return {pair_id, r.gamma, r.target_window, r.source_window, r.s_src, r.s_tgt, seed};
}

namespace detail {

inline Json window_json(const WindowSpec& w) { return {{"r", w.row}, {"c", w.col}, {"h", w.h}, {"w", w.w}}; }

inline WindowSpec window_from(const Json& j) {
  return {j.at("r").get<int>(), j.at("c").get<int>(), j.at("h").get<int>(), j.at("w").get<int>()};
}

}  // namespace detail

/// Reals go through the JSON writer's shortest round-trip formatting.
inline std::string mixed_record_line(const MixedRecord& r) {
  Json j;
  j["version"] = kFormatVersion;
  j["pair_id"] = r.pair_id;
  j["gamma"] = r.gamma;
  j["target_window"] = detail::window_json(r.target_window);
  j["source_window"] = detail::window_json(r.source_window);
  j["s_src"] = r.s_src;
  j["s_tgt"] = r.s_tgt;
  j["seed"] = r.seed;
  return j.dump();
}

inline void write_mixed_record(std::ostream& out, const MixedRecord& r) {
  out << mixed_record_line(r) << '\n';
  if (!out) raise(ErrorKind::IoError, "failed writing mixed record");
}

inline MixedRecord read_mixed_record(const std::string& line, const std::string& where = "record") {
  const Json j = detail::parse_json(line, where);
  detail::check_version(j, where);
  return detail::with_schema(where, [&] {
    MixedRecord r;
    r.pair_id = j.at("pair_id").get<std::uint64_t>();
    r.gamma = j.at("gamma").get<double>();
    r.target_window = detail::window_from(j.at("target_window"));
    r.source_window = detail::window_from(j.at("source_window"));
    r.s_src = j.at("s_src").get<double>();
    r.s_tgt = j.at("s_tgt").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  });
}

/// Reads a whole stream; any bad line fails the call before anything is returned.
inline std::vector<MixedRecord> read_mixed_records(std::istream& in, const std::string& name = "records") {
  std::vector<MixedRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    out.push_back(read_mixed_record(line, name + ":" + std::to_string(lineno)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV artifacts. The first line is a '#' comment carrying format version and seed.

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"epoch",  "loss_total", "loss_timix_i2t", "loss_timix_t2i",
                                             "loss_pta", "acc@1",    "modality_gap",   "loss_itc"};
  return cols;
}

inline void write_csv_preamble(std::ostream& out, const std::string& kind, std::uint64_t seed) {
  out << "# " << kind << " version=" << kFormatVersion << " seed=" << seed << '\n';
}

inline void write_metrics_csv(std::ostream& out, const RunMetrics& m, std::uint64_t seed) {
  write_csv_preamble(out, "timix-metrics", seed);
  CsvWriter csv(out);
  csv.header(metrics_columns());
  for (const auto& e : m.epochs) {
    csv.row({std::to_string(e.epoch), format_real(e.loss_total), format_real(e.loss_timix_i2t),
             format_real(e.loss_timix_t2i), format_real(e.loss_pta), format_real(e.acc_at_1),
             format_real(e.modality_gap), format_real(e.loss_itc)});
  }
}

inline RunMetrics read_metrics_csv(std::istream& in, const std::string& name = "metrics") {
  RunMetrics m;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line) || line[0] == '#') continue;
    const auto where = name + ":" + std::to_string(lineno);
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = fields;
      for (const auto& c : metrics_columns()) {
        if (std::find(header.begin(), header.end(), c) == header.end()) {
          raise(ErrorKind::SchemaError, where + ": missing column " + c);
        }
      }
      continue;
    }
    if (fields.size() != header.size()) raise(ErrorKind::SchemaError, where + ": wrong field count");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    EpochMetrics e;
    try {
      e.epoch = static_cast<int>(parse_real(row["epoch"]));
      e.loss_total = parse_real(row["loss_total"]);
      e.loss_timix_i2t = parse_real(row["loss_timix_i2t"]);
      e.loss_timix_t2i = parse_real(row["loss_timix_t2i"]);
      e.loss_pta = parse_real(row["loss_pta"]);
      e.acc_at_1 = parse_real(row["acc@1"]);
      e.modality_gap = parse_real(row["modality_gap"]);
      e.loss_itc = parse_real(row["loss_itc"]);
    } catch (const Error& err) {
      raise(ErrorKind::SchemaError, where + ": " + err.what());
    }
    m.epochs.push_back(e);
  }
  if (header.empty()) raise(ErrorKind::SchemaError, name + ": no header row");
  return m;
}

inline void write_mi_csv(std::ostream& out, const std::vector<MiTrialRow>& rows, std::uint64_t seed) {
  write_csv_preamble(out, "timix-verify-mi", seed);
  CsvWriter csv(out);
  csv.header({"trial", "N", "s_x", "I_x_rx", "I_y_ry", "I_x_ry", "I_y_rx", "L", "lhs", "rhs", "margin", "verdict"});
  for (const auto& r : rows) {
    csv.row({std::to_string(r.trial), std::to_string(r.n), format_real(r.s_x), format_real(r.i_x_rx),
             format_real(r.i_y_ry), format_real(r.i_x_ry), format_real(r.i_y_rx), format_real(r.loss),
             format_real(r.lhs), format_real(r.rhs), format_real(r.margin), r.ok ? "ok" : "violated"});
  }
}

inline void write_ablation_csv(std::ostream& out, const AblationTable& t, std::uint64_t seed) {
  write_csv_preamble(out, "timix-ablation", seed);
  CsvWriter csv(out);
  csv.header({"variant", "seed", "acc@1", "loss_itc", "modality_gap"});
  for (const auto& c : t.cells) {
    csv.row({to_string(c.variant), std::to_string(c.seed), format_real(c.final.acc_at_1), format_real(c.final.loss_itc),
             format_real(c.final.modality_gap)});
  }
  for (const auto& r : t.rows) {
    csv.row({to_string(r.variant), "median", format_real(r.median_acc), format_real(r.median_loss_itc),
             format_real(r.median_gap)});
  }
}

}  // namespace timix

#endif  // TIMIX_DATAIO_HPP_
