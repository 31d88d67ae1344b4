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

#ifndef TIMIX_CLI_HPP_
#define TIMIX_CLI_HPP_

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "timix/dataio.hpp"
#include "timix/error.hpp"
#include "timix/mi_verify.hpp"
#include "timix/region_mixer.hpp"
#include "timix/report.hpp"
#include "timix/rng.hpp"
#include "timix/score_map.hpp"
#include "timix/toytrain.hpp"

namespace timix::cli {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

// ---------------------------------------------------------------------------
// Stand-ins for the image and text backbones used by `mix` and `train-tpp`.

/**
 * Fixed pixel-to-feature map: per-patch colour means and deviations,
 * quadrant intensities and gradient energy, projected to `dim` by a seeded
 * random matrix.
 */
class PatchFeaturizer {
 public:
  static constexpr int kRawFeatures = 12;

  PatchFeaturizer(int dim, std::uint64_t seed)
      : proj_(static_cast<std::size_t>(dim), static_cast<std::size_t>(kRawFeatures)) {
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(kRawFeatures));
    for (auto& v : proj_.data) v = rng.normal(0.0, s);
  }

  std::vector<Embedding> operator()(const RgbImage& img, const PatchGrid& grid) const {
    if (img.height != grid.height() || img.width != grid.width() || img.channels != 3) {
      raise(ErrorKind::ShapeMismatch, "image does not match the patch grid");
    }
    const int p = grid.patch();
    std::vector<Embedding> out;
    out.reserve(static_cast<std::size_t>(grid.size()));
    for (int r = 0; r < grid.rows(); ++r) {
      for (int c = 0; c < grid.cols(); ++c) {
        std::vector<double> raw(kRawFeatures, 0.0);
        double gh = 0.0, gv = 0.0;
        const double n = static_cast<double>(p) * p;
        for (int y = 0; y < p; ++y) {
          for (int x = 0; x < p; ++x) {
            const int py = r * p + y, px = c * p + x;
            double lum = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
              const double v = img.at(py, px, ch) / 255.0;
              raw[static_cast<std::size_t>(ch)] += v / n;
              raw[static_cast<std::size_t>(3 + ch)] += v * v / n;
              lum += v / 3.0;
            }
            const int q = (y < p / 2 ? 0 : 2) + (x < p / 2 ? 0 : 1);
            raw[static_cast<std::size_t>(6 + q)] += lum / (n / 4.0);
            if (x + 1 < p) {
              double d = 0.0;
              for (int ch = 0; ch < 3; ++ch) d += img.at(py, px + 1, ch) / 255.0 - img.at(py, px, ch) / 255.0;
              gh += d * d / 9.0;
            }
            if (y + 1 < p) {
              double d = 0.0;
              for (int ch = 0; ch < 3; ++ch) d += img.at(py + 1, px, ch) / 255.0 - img.at(py, px, ch) / 255.0;
              gv += d * d / 9.0;
            }
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          const auto m = raw[static_cast<std::size_t>(ch)];
          raw[static_cast<std::size_t>(3 + ch)] = std::sqrt(std::max(0.0, raw[static_cast<std::size_t>(3 + ch)] - m * m));
        }
        raw[10] = std::sqrt(gh / n);
        raw[11] = std::sqrt(gv / n);
        out.push_back(proj_.apply(raw));
      }
    }
    return out;
  }

 private:
  Matrix proj_;
};

/// Signed feature hashing of lower-cased alphanumeric tokens, L2-normalized.
inline Embedding hashed_bow(const std::string& text, int dim) {
  Embedding v(static_cast<std::size_t>(dim), 0.0);
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : tok) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    v[static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim))] += (h >> 63) ? -1.0 : 1.0;
    tok.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      tok.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  const double n = norm(v);
  if (n > 0.0) {
    for (auto& x : v) x /= n;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Output bookkeeping: everything a job creates is removed if the job fails.

class OutputSet {
 public:
  fs::path file(const fs::path& p) {
    files_.push_back(p);
    return p;
  }

  void directory(const fs::path& d) {
    if (fs::exists(d)) return;
    fs::create_directories(d);
    dirs_.push_back(d);
  }

  void rollback() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove_all(*it, ec);
  }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
};

inline std::ofstream open_output(OutputSet& outputs, const fs::path& p, bool binary = false) {
  std::ofstream f(outputs.file(p), binary ? std::ios::binary : std::ios::out);
  if (!f) raise(ErrorKind::IoError, "cannot create " + p.string());
  return f;
}

/// Output files must land in an existing directory; checked before any work.
inline void require_parent_dir(const fs::path& p) {
  const auto parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) raise(ErrorKind::InvalidArgument, "output directory " + parent.string() + " does not exist");
}

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) raise(ErrorKind::MissingFile, "input file " + p.string() + " not found");
}

// ---------------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
};

/// A validated command: `describe` is the resolved configuration, `work` performs it.
struct Job {
  Json describe;
  std::uint64_t seed = 0;
  std::function<void(OutputSet&)> work;
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool json_errors = false;
};

inline void add_common(CLI::App* sub, CommonOptions& c) {
  sub->add_option("--config", c.config, "RunConfig JSON file");
  sub->add_option("--seed", c.seed, "master seed (overrides TIMIX_SEED and the config)");
  sub->add_option("--threads", c.threads, "worker threads")->default_val(1);
  sub->add_flag("--json-errors", c.json_errors, "report errors as JSON on stderr");
}

/// Config file, then TIMIX_SEED, then an explicit --seed.
inline RunConfig resolve_config(const CommonOptions& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  apply_env_seed(cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads < 1) raise(ErrorKind::InvalidArgument, "--threads must be at least 1");
  return cfg;
}

inline TrainConfig train_config_of(const RunConfig& rc, int eval_size) {
  TrainConfig t;
  t.components = components_of(parse_strategy(rc.strategy));
  t.epochs = rc.epochs;
  t.warmup_epochs = rc.warmup_epochs;
  t.lr = rc.lr;
  t.batch_size = rc.batch_size;
  t.embed_dim = rc.embed_dim;
  t.hidden_dim = rc.hidden_dim;
  t.temperature = rc.temperature;
  t.gamma_lo = rc.gamma_lo;
  t.gamma_hi = rc.gamma_hi;
  t.eval_size = eval_size;
  t.seed = rc.seed;
  return t;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands. Each `prepare_*` validates everything and returns the job.

struct MixOptions {
  std::string manifest;
  std::string out;
  std::string tpp;
};

inline Job prepare_mix(const CommonOptions& c, const MixOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  cfg.validate();
  require_file(o.manifest);
  auto manifest = load_manifest(o.manifest, cfg.patch);
  if (manifest.entries.size() < 2) raise(ErrorKind::InvalidArgument, "mixing needs at least two images");
  const int h = manifest.entries.front().height, w = manifest.entries.front().width;
  for (const auto& e : manifest.entries) {
    if (e.height != h || e.width != w) raise(ErrorKind::BadDimensions, "image " + e.image_id + " differs in size from the first image");
  }
  cfg.height = h;
  cfg.width = w;
  const auto grid = PatchGrid::make(h, w, cfg.patch);
  std::optional<TppModel> loaded;
  if (!o.tpp.empty()) {
    require_file(o.tpp);
    loaded = read_tpp_checkpoint(o.tpp);
    if (loaded->dim() != cfg.embed_dim) raise(ErrorKind::DimensionMismatch, "TPP checkpoint dimension differs from D");
  }
  if (fs::exists(o.out) && !fs::is_directory(o.out)) raise(ErrorKind::InvalidArgument, o.out + " is not a directory");

  Job job;
  job.seed = cfg.seed;
  job.describe = to_json(cfg);
  job.describe["manifest"] = o.manifest;
  job.describe["images"] = manifest.entries.size();
  job.work = [cfg, grid, manifest, loaded, o, &ctx](OutputSet& outputs) {
    const TppModel tpp = loaded ? *loaded : TppModel(cfg.embed_dim, cfg.hidden_dim, derive_seed(cfg.seed, 1));
    const PatchFeaturizer featurize(cfg.embed_dim, derive_seed(cfg.seed, 2));
    std::vector<RgbImage> images;
    std::vector<ScoreMap> maps;
    for (const auto& e : manifest.entries) {
      images.push_back(read_ppm(e.file));
      const auto text = hashed_bow(e.captions.empty() ? std::string{} : e.captions.front(), cfg.embed_dim);
      maps.push_back(tpp_forward(tpp, grid, featurize(images.back(), grid), text));
    }
    Rng rng(derive_seed(cfg.seed, 3));
    const std::size_t even = images.size() - images.size() % 2;
    const auto mixed = mix_batch<RgbImage>(std::span<const RgbImage>(images.data(), even),
                                           std::span<const ScoreMap>(maps.data(), even), rng, cfg.gamma_lo,
                                           cfg.gamma_hi);
    outputs.directory(o.out);
    const fs::path dir(o.out);
    auto sidecar = open_output(outputs, dir / "mixed.jsonl");
    for (std::size_t k = 0; k < mixed.size(); ++k) {
      const auto& [img, sample] = mixed[k];
      const auto& tgt = manifest.entries[sample.target];
      const auto& src = manifest.entries[sample.source];
      const std::string name = "mix_" + std::to_string(sample.pair) + "_" + tgt.image_id + "_" + src.image_id + ".ppm";
      write_ppm(outputs.file(dir / name), img);
      Json j = Json::parse(mixed_record_line(to_record(sample.recipe, sample.pair, cfg.seed)));
      j["target_id"] = tgt.image_id;
      j["source_id"] = src.image_id;
      j["file"] = name;
      sidecar << j.dump() << '\n';
    }
    if (!sidecar) raise(ErrorKind::IoError, "failed writing mixed.jsonl");
    ctx.err << "wrote " << mixed.size() << " mixed images to " << o.out << '\n';
  };
  return job;
}

struct TrainTppOptions {
  std::string manifest;
  std::string annotations;
  std::string out;
  int epochs = -1;
  double lr = -1.0;
};

inline Job prepare_train_tpp(const CommonOptions& c, const TrainTppOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  if (o.lr >= 0.0) cfg.lr = o.lr;
  cfg.validate();
  require_file(o.manifest);
  require_parent_dir(o.out);
  auto manifest = load_manifest(o.manifest, cfg.patch);
  if (!o.annotations.empty()) {
    require_file(o.annotations);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) by_id[manifest.entries[i].image_id] = i;
    for (const auto& a : read_annotations(o.annotations)) {
      const auto it = by_id.find(a.image_id);
      if (it == by_id.end()) raise(ErrorKind::SchemaError, "annotation for unknown image_id " + a.image_id);
      auto& e = manifest.entries[it->second];
      if (a.width != e.width || a.height != e.height) {
        raise(ErrorKind::BadDimensions, "annotation size differs from image " + a.image_id);
      }
      e.boxes.insert(e.boxes.end(), a.boxes.begin(), a.boxes.end());
    }
  }
  std::size_t boxes = 0;
  for (const auto& e : manifest.entries) boxes += e.boxes.size();
  if (boxes == 0) raise(ErrorKind::InvalidArgument, "no boxes to train on; add boxes to the manifest or --annotations");

  Job job;
  job.seed = cfg.seed;
  job.describe = to_json(cfg);
  job.describe["manifest"] = o.manifest;
  job.describe["boxes"] = boxes;
  job.work = [cfg, manifest, o, &ctx](OutputSet& outputs) {
    TppModel tpp(cfg.embed_dim, cfg.hidden_dim, derive_seed(cfg.seed, 1));
    const PatchFeaturizer featurize(cfg.embed_dim, derive_seed(cfg.seed, 2));
    std::vector<PtaExample> examples;
    for (const auto& e : manifest.entries) {
      if (e.boxes.empty()) continue;
      const auto grid = PatchGrid::make(e.height, e.width, cfg.patch);
      const auto patches = featurize(read_ppm(e.file), grid);
      for (const auto& b : e.boxes) {
        const auto& caption = b.caption.empty() && !e.captions.empty() ? e.captions.front() : b.caption;
        examples.push_back({patches, hashed_bow(caption, cfg.embed_dim), box_to_patch_labels(grid, b.box)});
      }
    }
    Rng rng(derive_seed(cfg.seed, 4));
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::shuffle(examples.begin(), examples.end(), rng.engine());
      double loss = 0.0;
      std::size_t steps = 0;
      for (std::size_t i = 0; i < examples.size(); i += bs) {
        const auto n = std::min(bs, examples.size() - i);
        loss += pta_train_step(tpp, std::span<const PtaExample>(examples.data() + i, n), cfg.lr);
        ++steps;
      }
      ctx.err << "epoch " << epoch << " pta_loss " << format_real(loss / static_cast<double>(steps)) << '\n';
    }
    auto f = open_output(outputs, o.out);
    f << save_tpp_checkpoint(tpp);
    if (!f) raise(ErrorKind::IoError, "failed writing " + o.out);
  };
  return job;
}

struct TrainOptions {
  std::string strategy;
  std::string spec;
  std::string metrics;
  int epochs = -1;
  int warmup = -1;
  double lr = -1.0;
  int eval_size = 2048;
};

inline SyntheticSpec resolve_spec(const std::string& path, std::uint64_t seed) {
  SyntheticSpec s = path.empty() ? SyntheticSpec{} : (require_file(path), load_synthetic_spec(path));
  s.seed = seed;
  s.validate();
  return s;
}

inline Job prepare_train(const CommonOptions& c, const TrainOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  if (!o.strategy.empty()) cfg.strategy = o.strategy;
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  if (o.warmup >= 0) cfg.warmup_epochs = o.warmup;
  if (o.lr >= 0.0) cfg.lr = o.lr;
  cfg.validate();
  const auto spec = resolve_spec(o.spec, cfg.seed);
  const auto tc = train_config_of(cfg, o.eval_size);
  tc.validate();
  require_parent_dir(o.metrics);

  Job job;
  job.seed = cfg.seed;
  job.describe = to_json(cfg);
  job.describe["spec"] = to_json(spec);
  job.describe["eval_size"] = o.eval_size;
  job.work = [cfg, spec, tc, o, &ctx](OutputSet& outputs) {
    const auto data = generate_dataset(spec);
    const auto heldout = generate_heldout(data, tc.eval_size, spec.rho);
    const auto res = train(data, heldout, tc);
    auto f = open_output(outputs, o.metrics);
    write_metrics_csv(f, res.metrics, cfg.seed);
    if (!f) raise(ErrorKind::IoError, "failed writing " + o.metrics);
    if (!res.metrics.epochs.empty()) {
      const auto& last = res.metrics.final();
      ctx.err << "final loss_itc " << format_real(last.loss_itc) << " acc@1 " << format_real(last.acc_at_1)
              << " modality_gap " << format_real(last.modality_gap) << '\n';
    }
  };
  return job;
}

struct AblateOptions {
  std::string spec;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  int epochs = -1;
  int eval_size = 2048;
};

inline Variant parse_variant(const std::string& s) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  raise(ErrorKind::InvalidArgument, "unknown variant '" + s + "'");
}

inline Job prepare_ablate(const CommonOptions& c, const AblateOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  cfg.validate();
  const auto spec = resolve_spec(o.spec, cfg.seed);
  auto tc = train_config_of(cfg, o.eval_size);
  tc.validate();
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
  std::vector<Variant> variants;
  for (const auto& v : o.variants) variants.push_back(parse_variant(v));
  if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());
  require_parent_dir(o.out);

  Job job;
  job.seed = cfg.seed;
  job.describe = to_json(cfg);
  job.describe["spec"] = to_json(spec);
  job.describe["seeds"] = seeds;
  job.describe["eval_size"] = o.eval_size;
  const int threads = c.threads;
  job.work = [cfg, spec, tc, seeds, variants, o, threads, &ctx](OutputSet& outputs) {
    const auto table = ablate(spec, tc, seeds, variants, threads);
    auto f = open_output(outputs, o.out);
    write_ablation_csv(f, table, cfg.seed);
    if (!f) raise(ErrorKind::IoError, "failed writing " + o.out);
    for (const auto& r : table.rows) {
      ctx.err << to_string(r.variant) << " median acc@1 " << format_real(r.median_acc) << '\n';
    }
  };
  return job;
}

struct VerifyMiOptions {
  int trials = 10;
  int max_alphabet = 4;
  std::string mode = "timix";
  std::string out;
};

inline Job prepare_verify_mi(const CommonOptions& c, const VerifyMiOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  if (o.trials < 1) raise(ErrorKind::InvalidArgument, "--trials must be at least 1");
  if (o.max_alphabet < 2) raise(ErrorKind::InvalidArgument, "--max-alphabet must be at least 2");
  if (o.mode != "timix" && o.mode != "vanilla") raise(ErrorKind::InvalidArgument, "--mode must be timix or vanilla");
  if (!o.out.empty()) require_parent_dir(o.out);

  MiFuzzOptions fz;
  fz.trials = o.trials;
  fz.seed = cfg.seed;
  fz.max_alphabet = o.max_alphabet;
  fz.threads = c.threads;
  fz.vanilla = o.mode == "vanilla";

  Job job;
  job.seed = cfg.seed;
  job.describe = {{"seed", cfg.seed}, {"trials", o.trials}, {"max_alphabet", o.max_alphabet}, {"mode", o.mode},
                  {"threads", c.threads}, {"batch_sizes", kFuzzBatchSizes}};
  job.work = [fz, o, &ctx](OutputSet& outputs) {
    const auto rows = run_mi_fuzz(fz);
    if (o.out.empty()) {
      write_mi_csv(ctx.out, rows, fz.seed);
    } else {
      auto f = open_output(outputs, o.out);
      write_mi_csv(f, rows, fz.seed);
      if (!f) raise(ErrorKind::IoError, "failed writing " + o.out);
    }
    const auto bad = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok; });
    ctx.err << rows.size() - static_cast<std::size_t>(bad) << "/" << rows.size() << " trials ok\n";
  };
  return job;
}

struct ReportOptions {
  std::vector<std::string> metrics;
  std::vector<std::string> labels;
  std::string out;
  bool no_timestamp = false;
};

inline Job prepare_report(const CommonOptions& c, const ReportOptions& o, Context& ctx) {
  RunConfig cfg = resolve_config(c);
  if (o.metrics.empty()) raise(ErrorKind::InvalidArgument, "--metrics needs at least one CSV");
  if (!o.labels.empty() && o.labels.size() != o.metrics.size()) {
    raise(ErrorKind::InvalidArgument, "--labels must name every metrics file");
  }
  std::vector<std::pair<std::string, RunMetrics>> runs;
  for (std::size_t i = 0; i < o.metrics.size(); ++i) {
    require_file(o.metrics[i]);
    std::ifstream in(o.metrics[i]);
    auto m = read_metrics_csv(in, o.metrics[i]);
    if (m.epochs.empty()) raise(ErrorKind::SchemaError, o.metrics[i] + ": no epochs");
    runs.emplace_back(o.labels.empty() ? fs::path(o.metrics[i]).stem().string() : o.labels[i], std::move(m));
  }
  if (fs::exists(o.out) && !fs::is_directory(o.out)) raise(ErrorKind::InvalidArgument, o.out + " is not a directory");

  Job job;
  job.seed = cfg.seed;
  job.describe = {{"seed", cfg.seed}, {"metrics", o.metrics}, {"out", o.out}, {"timestamp", !o.no_timestamp}};
  job.work = [runs, o, &ctx](OutputSet& outputs) {
    outputs.directory(o.out);
    const fs::path dir(o.out);
    for (const auto& chart : default_charts()) {
      ChartOptions opt;
      opt.title = chart.title;
      opt.y_label = chart.y_label;
      if (!o.no_timestamp) opt.timestamp = utc_timestamp();
      auto f = open_output(outputs, dir / chart.file);
      f << render_line_chart(metric_series(runs, chart), opt);
      if (!f) raise(ErrorKind::IoError, "failed writing " + chart.file);
    }
    auto s = open_output(outputs, dir / "summary.txt");
    s << render_summary(runs);
    if (!s) raise(ErrorKind::IoError, "failed writing summary.txt");
    ctx.err << "wrote report to " << o.out << '\n';
  };
  return job;
}

// ---------------------------------------------------------------------------

inline void report_error(Context& ctx, bool json, std::string_view kind, const std::string& message, int code) {
  if (json) {
    Json j;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    ctx.err << j.dump() << '\n';
  } else {
    ctx.err << "error [" << kind << "]: " << message << '\n';
  }
}

/**
 * Entry point. Exit 0 on success, 1 on validation errors (nothing written),
 * 2 on runtime failures (outputs created by the run are removed).
 */
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Context ctx{out, err};
  const bool json_errors = std::find(args.begin(), args.end(), "--json-errors") != args.end();

  CLI::App app{"timix: text-aware image mixing toolkit"};
  app.name(args.empty() ? "timix" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  CommonOptions common;
  auto* mix = app.add_subcommand("mix", "mix manifest images pairwise with text-aware windows");
  MixOptions mix_o;
  mix->add_option("--manifest", mix_o.manifest, "dataset manifest (JSONL)")->required();
  mix->add_option("--out", mix_o.out, "output directory for PPMs and mixed.jsonl")->required();
  mix->add_option("--tpp", mix_o.tpp, "TPP checkpoint (default: seeded initialization)");

  auto* tpp = app.add_subcommand("train-tpp", "train the text-aware patch predictor on box annotations");
  TrainTppOptions tpp_o;
  tpp->add_option("--manifest", tpp_o.manifest, "dataset manifest (JSONL)")->required();
  tpp->add_option("--annotations", tpp_o.annotations, "extra box annotations (JSONL)");
  tpp->add_option("--out", tpp_o.out, "checkpoint path")->required();
  tpp->add_option("--epochs", tpp_o.epochs, "epochs (default: config)");
  tpp->add_option("--lr", tpp_o.lr, "learning rate (default: config)");

  auto* tr = app.add_subcommand("train", "train the toy dual encoder on synthetic data");
  TrainOptions tr_o;
  tr->add_option("--strategy", tr_o.strategy, "none | mixup | cutmix | timix (default: config)");
  tr->add_option("--spec", tr_o.spec, "SyntheticSpec JSON (its seed is replaced by the master seed)");
  tr->add_option("--metrics", tr_o.metrics, "metrics CSV path")->required();
  tr->add_option("--epochs", tr_o.epochs, "epochs (default: config)");
  tr->add_option("--warmup", tr_o.warmup, "warm-up epochs without mixing (default: config)");
  tr->add_option("--lr", tr_o.lr, "learning rate (default: config)");
  tr->add_option("--eval-size", tr_o.eval_size, "held-out examples")->default_val(2048);

  auto* ab = app.add_subcommand("ablate", "run the full / no-pta / no-mix / none comparison");
  AblateOptions ab_o;
  ab->add_option("--spec", ab_o.spec, "SyntheticSpec JSON");
  ab->add_option("--out", ab_o.out, "table CSV path")->required();
  ab->add_option("--seeds", ab_o.seeds, "seeds (default: seed, seed+1, seed+2)")->delimiter(',');
  ab->add_option("--variants", ab_o.variants, "subset of full,no-pta,no-mix,none")->delimiter(',');
  ab->add_option("--epochs", ab_o.epochs, "epochs (default: config)");
  ab->add_option("--eval-size", ab_o.eval_size, "held-out examples")->default_val(2048);

  auto* mi = app.add_subcommand("verify-mi", "check the mutual-information bounds on random joints");
  VerifyMiOptions mi_o;
  mi->add_option("--trials", mi_o.trials, "number of random joints")->default_val(10);
  mi->add_option("--max-alphabet", mi_o.max_alphabet, "largest alphabet size")->default_val(4);
  mi->add_option("--mode", mi_o.mode, "timix | vanilla")->default_val("timix");
  mi->add_option("--out", mi_o.out, "CSV path (default: stdout)");

  auto* rep = app.add_subcommand("report", "render metrics CSVs to SVG charts and a summary");
  ReportOptions rep_o;
  rep->add_option("--metrics", rep_o.metrics, "metrics CSV files")->required();
  rep->add_option("--labels", rep_o.labels, "series names (default: file stems)")->delimiter(',');
  rep->add_option("--out", rep_o.out, "output directory")->required();
  rep->add_flag("--no-timestamp", rep_o.no_timestamp, "omit the generation time from SVG metadata");

  for (auto* sub : {mix, tpp, tr, ab, mi, rep}) add_common(sub, common);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(ctx, json_errors, "InvalidArgument", e.what(), kValidation);
    return kValidation;
  }

  Job job;
  try {
    if (mix->parsed()) job = prepare_mix(common, mix_o, ctx);
    else if (tpp->parsed()) job = prepare_train_tpp(common, tpp_o, ctx);
    else if (tr->parsed()) job = prepare_train(common, tr_o, ctx);
    else if (ab->parsed()) job = prepare_ablate(common, ab_o, ctx);
    else if (mi->parsed()) job = prepare_verify_mi(common, mi_o, ctx);
    else job = prepare_report(common, rep_o, ctx);
  } catch (const Error& e) {
    report_error(ctx, json_errors, to_string(e.kind()), e.message(), kValidation);
    return kValidation;
  } catch (const std::exception& e) {
    report_error(ctx, json_errors, "InvalidArgument", e.what(), kValidation);
    return kValidation;
  }

  err << "resolved config: " << job.describe.dump() << '\n';
  err << "master seed: " << job.seed << '\n';
  OutputSet outputs;
  try {
    job.work(outputs);
  } catch (const Error& e) {
    outputs.rollback();
    report_error(ctx, json_errors, to_string(e.kind()), e.message(), kRuntime);
    return kRuntime;
  } catch (const std::exception& e) {
    outputs.rollback();
    report_error(ctx, json_errors, "IoError", e.what(), kRuntime);
    return kRuntime;
  }
  return kOk;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace timix::cli

#endif  // TIMIX_CLI_HPP_
