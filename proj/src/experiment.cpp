// SPDX-License-Identifier: Apache-2.0
#include "kdgan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "kdgan/png_io.hpp"

namespace kdgan {
namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string step_tag(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06lld", static_cast<long long>(step));
  return buf;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write file", path.string());
  f << text;
  if (!f) throw IoError("failed writing file", path.string());
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory: " + ec.message(), p.string());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0) * 127.5, 0.0, 255.0)));
}

ImageBatch fixed_samples(const TrainConfig& cfg, const GanArch& arch, const ParamSet& g, Index n) {
  RngStream rng(cfg.train.master_seed, "samples");
  NoiseBatch z = sample_noise(rng, n, arch.latent_dim);
  std::vector<int> labels;
  if (arch.conditional)
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(i % arch.num_classes));
  return generate(arch, g, z, labels);
}

struct CsvRow {
  std::int64_t step;
  std::string name;
  double value;
};

std::vector<CsvRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file", path);
  std::vector<CsvRow> rows;
  std::string line;
  std::getline(in, line);
  if (line != "step,name,value,seed") throw IoError("unexpected metrics header '" + line + "'", path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string step, name, value;
    std::getline(ss, step, ',');
    std::getline(ss, name, ',');
    std::getline(ss, value, ',');
    try {
      rows.push_back({std::stoll(step), name, std::stod(value)});
    } catch (const std::exception&) {
      throw IoError("malformed metrics row '" + line + "'", path);
    }
  }
  return rows;
}

}  // namespace

Evaluator::Evaluator(const TrainConfig& cfg, const Dataset& full,
                     std::shared_ptr<const TeacherModel> teacher)
    : cfg_(cfg), teacher_(std::move(teacher)), templates_(full.templates),
      num_classes_(full.num_classes()) {
  Matrix real = teacher_->encode_images(ad::Var::constant(full.images)).value();
  real_stats_ = metrics::FeatureStats::from_features(real);
  if (templates_.rows() == 0 && num_classes_ >= 2)
    class_texts_ = teacher_->encode_texts(
        texts_from_labels(full.class_names, PromptTemplate(cfg_.cgkd.prompt_template)));
}

std::map<std::string, double> Evaluator::evaluate(const GanArch& arch, const ParamSet& g) const {
  RngStream rng(cfg_.train.master_seed, "eval");
  const Index n = cfg_.eval.num_samples;
  NoiseBatch z = sample_noise(rng, n, arch.latent_dim);
  std::vector<int> labels;
  if (arch.conditional)
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(i % arch.num_classes));
  ImageBatch fake = generate(arch, g, z, labels);
  Matrix feats = teacher_->encode_images(ad::Var::constant(fake.data)).value();

  std::map<std::string, double> out;
  std::vector<std::string> w;
  out["eval/teacher_fid"] =
      metrics::frechet_distance(metrics::FeatureStats::from_features(feats), real_stats_, &w);
  for (auto& s : w)
    if (std::find(warnings_.begin(), warnings_.end(), s) == warnings_.end()) warnings_.push_back(s);
  out["eval/teacher_cosine_diversity"] =
      metrics::perceptual_diversity(feats, cfg_.eval.diversity_pairs, cfg_.train.master_seed);
  if (templates_.rows() > 0) {
    out["eval/is_style"] =
        metrics::inception_style_score(metrics::template_classifier_probs(fake.data, templates_));
    metrics::ModeCoverage cov = metrics::mode_coverage(fake.data, templates_);
    out["eval/modes_covered"] = cov.covered;
    out["eval/mode_coverage"] = static_cast<double>(cov.covered) / static_cast<double>(templates_.rows());
  } else if (class_texts_.count() >= 2) {
    out["eval/is_style"] =
        metrics::inception_style_score(metrics::zero_shot_probs(feats, class_texts_.data()));
  }
  return out;
}

// ------------------------------------------------------------ metrics.csv

MetricsWriter::MetricsWriter(const std::string& path, std::uint64_t seed, bool append)
    : path_(path), seed_(seed) {
  const bool fresh = !append || !fs::exists(path);
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open metrics file", path);
  if (fresh) out_ << "step,name,value,seed\n";
  out_.flush();
}

void MetricsWriter::write(std::int64_t step, const std::map<std::string, double>& values) {
  for (const auto& [name, v] : values)
    out_ << step << ',' << name << ',' << format_double(v) << ',' << seed_ << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing metrics", path_);
}

void truncate_metrics(const std::string& path, std::int64_t step, bool keep_eval_at_step) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file", path);
  std::string header, line, kept;
  std::getline(in, header);
  kept = header + "\n";
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    if (c1 == std::string::npos) continue;
    const std::int64_t s = std::stoll(line.substr(0, c1));
    const bool is_eval = line.compare(c1 + 1, 5, "eval/") == 0;
    if (s < step || (s == step && (!is_eval || keep_eval_at_step))) kept += line + "\n";
  }
  in.close();
  write_text(path, kept);
}

// ------------------------------------------------------------ sample grids

void write_sample_grid(const std::string& path, const ImageBatch& images) {
  const int cols = 8, rows = 8;
  const ImageShape& s = images.shape;
  const int tile_w = s.width + 1, tile_h = s.height + 1;
  RawImage img;
  img.width = cols * tile_w + 1;
  img.height = rows * tile_h + 1;
  img.channels = s.channels == 3 ? 3 : 1;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * img.channels, 128);
  for (Index k = 0; k < std::min<Index>(images.batch(), rows * cols); ++k) {
    const int ox = 1 + static_cast<int>(k % cols) * tile_w;
    const int oy = 1 + static_cast<int>(k / cols) * tile_h;
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          const double v = images.data(k, (static_cast<Index>(c) * s.height + y) * s.width + x);
          img.pixels[(static_cast<std::size_t>(oy + y) * img.width + ox + x) * img.channels + c] =
              to_byte(v);
        }
  }
  write_png(path, img);
}

// ------------------------------------------------------------------- runs

std::string run_directory(const TrainConfig& cfg) {
  const char* env = std::getenv("KD_DLGAN_RUN_DIR");
  fs::path root = (env && *env) ? fs::path(env) : fs::path(cfg.run.out_root);
  return (root / cfg.run.name).string();
}

RunResult run_experiment(const TrainConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = run_directory(cfg);
  make_dirs(dir / "checkpoints");
  make_dirs(dir / "samples");
  write_text(dir / "config.snapshot", cfg.dump() + "\n");

  DatasetSpec spec = cfg.dataset_spec();
  auto full = std::make_shared<const Dataset>(load_full(spec));
  std::vector<std::string> warnings = full->warnings;
  auto rows = stratified_subset(full->labels, full->num_classes(), spec.fraction, spec.subset_seed,
                                &warnings);
  auto train = std::make_shared<const Dataset>(subset(*full, rows));

  auto teacher = TeacherRegistry::instance().create(cfg.teacher, full->shape);
  Trainer trainer(cfg, train, teacher);
  Evaluator evaluator(cfg, *full, teacher);

  std::vector<Index> probe_rows;
  for (Index i = 0; i < std::min<Index>(16, full->size()); ++i) probe_rows.push_back(i);
  const ImageBatch probe = full->gather(probe_rows, false);

  RunResult result;
  result.run_dir = dir.string();
  result.teacher_fingerprint_start = teacher_fingerprint(*teacher, probe);

  const std::string metrics_path = (dir / "metrics.csv").string();
  bool resumed = false;
  if (opts.resume_checkpoint) {
    CheckpointRecord rec = read_checkpoint(*opts.resume_checkpoint);
    trainer.restore(rec);
    if (fs::exists(metrics_path))
      truncate_metrics(metrics_path, rec.step, rec.step % cfg.train.eval_every == 0);
    resumed = true;
  }
  MetricsWriter writer(metrics_path, cfg.train.master_seed, resumed);

  auto log = [&](const std::string& msg) {
    if (!opts.quiet) std::cerr << msg << '\n';
  };
  std::optional<std::map<std::string, double>> last_eval;
  auto eval_at = [&](std::int64_t step) {
    last_eval = evaluator.evaluate(trainer.arch(), trainer.params().g);
    writer.write(step, *last_eval);
    log("step " + std::to_string(step) + " teacher_fid " + format_double(last_eval->at("eval/teacher_fid")));
  };
  auto grid_at = [&](std::int64_t step) {
    write_sample_grid((dir / "samples" / (step_tag(step) + ".png")).string(),
                      fixed_samples(cfg, trainer.arch(), trainer.params().g, 64));
  };

  if (!resumed) {
    eval_at(0);
    grid_at(0);
  }
  const std::int64_t steps = cfg.train.steps;
  for (std::int64_t s = trainer.step() + 1; s <= steps; ++s) {
    StepMetrics m;
    try {
      m = trainer.train_step();
    } catch (const TrainingFailure& f) {
      writer.write(f.step(), f.components());
      write_checkpoint((dir / "checkpoints" / ("failure_" + step_tag(f.step()) + ".ckpt")).string(),
                       trainer.checkpoint());
      throw;
    }
    writer.write(m.step, m.values);
    const bool last = s == steps;
    if (s % cfg.train.eval_every == 0 || last) eval_at(s);
    if (s % cfg.train.sample_every == 0 || last) grid_at(s);
    if (s % cfg.train.checkpoint_every == 0 || last)
      write_checkpoint((dir / "checkpoints" / (step_tag(s) + ".ckpt")).string(), trainer.checkpoint());
  }
  if (!last_eval) last_eval = evaluator.evaluate(trainer.arch(), trainer.params().g);

  result.final_step = trainer.step();
  result.final_eval = *last_eval;
  result.teacher_fingerprint_end = teacher_fingerprint(*teacher, probe);

  for (const auto& w : evaluator.warnings()) warnings.push_back(w);
  nlohmann::json summary;
  summary["step"] = result.final_step;
  summary["config_hash"] = hex(cfg.hash());
  summary["master_seed"] = cfg.train.master_seed;
  summary["train_samples"] = train->size();
  summary["train_index_hash"] = hex(train->index_hash());
  for (const auto& [k, v] : result.final_eval) summary["final"][k.substr(5)] = v;
  summary["teacher_fingerprint_start"] = hex(result.teacher_fingerprint_start);
  summary["teacher_fingerprint_end"] = hex(result.teacher_fingerprint_end);
  summary["teacher_unchanged"] = result.teacher_fingerprint_start == result.teacher_fingerprint_end;
  summary["warnings"] = warnings;
  summary["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& data_spec_path,
                               const std::string& out_csv) {
  CheckpointRecord rec = read_checkpoint(ckpt_path);
  TrainConfig cfg = TrainConfig::from_json_text(rec.config_json, ckpt_path);
  if (!data_spec_path.empty()) {
    std::ifstream in(data_spec_path);
    if (!in) throw ConfigError("cannot open data spec: " + data_spec_path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(data_spec_path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(data_spec_path + ": expected a flat JSON object");
    for (const auto& [k, v] : doc.items())
      if (k.rfind("data.", 0) != 0)
        throw ConfigError(data_spec_path + ": only data.* keys are allowed, got '" + k + "'");
    cfg.merge_json_text(ss.str(), data_spec_path);
    cfg.validate();
  }
  Dataset full = load_full(cfg.dataset_spec());
  auto teacher = TeacherRegistry::instance().create(cfg.teacher, full.shape);
  GanArch arch = cfg.arch(full.num_classes());
  ParamSet g = init_params(arch, cfg.train.master_seed).g;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Matrix& src = rec.array("g/" + g.name(i));
    if (src.rows() != g.value(i).rows() || src.cols() != g.value(i).cols())
      throw ConfigError("checkpoint generator '" + g.name(i) + "' does not fit the data spec");
    g.value(i) = src;
  }
  Evaluator evaluator(cfg, full, teacher);
  EvalResult r;
  r.step = rec.step;
  r.values = evaluator.evaluate(arch, g);
  r.csv_path = out_csv.empty() ? (fs::path(ckpt_path).parent_path() / "eval_metrics.csv").string() : out_csv;
  MetricsWriter(r.csv_path, cfg.train.master_seed, true).write(r.step, r.values);
  return r;
}

// ------------------------------------------------------------------ plots

namespace {

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  Canvas(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(width) * height * 3, 255) {}
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

void plot_series(const std::string& path, const std::vector<std::pair<double, double>>& pts) {
  const int W = 480, H = 280, L = 40, R = 10, T = 10, B = 30;
  Canvas c(W, H);
  double x0 = pts.front().first, x1 = pts.back().first;
  double y0 = pts.front().second, y1 = y0;
  for (const auto& [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) { return L + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (W - L - R))); };
  auto py = [&](double y) { return H - B - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (H - T - B))); };
  for (int i = 0; i <= 4; ++i) {
    const int gy = T + i * (H - T - B) / 4;
    c.line(L, gy, W - R, gy, 225, 225, 225);
  }
  c.line(L, T, L, H - B, 0, 0, 0);
  c.line(L, H - B, W - R, H - B, 0, 0, 0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    c.line(px(pts[i - 1].first), py(pts[i - 1].second), px(pts[i].first), py(pts[i].second), 31, 119, 180);
  if (pts.size() == 1) c.set(px(pts[0].first), py(pts[0].second), 31, 119, 180);
  write_png(path, RawImage{W, H, 3, std::move(c.px)});
}

}  // namespace

std::vector<std::string> plot_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  auto rows = read_metrics((dir / "metrics.csv").string());
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows)
    if (std::isfinite(r.value)) series[r.name].emplace_back(static_cast<double>(r.step), r.value);
  make_dirs(dir / "plots");
  std::vector<std::string> out;
  for (const auto& [name, pts] : series) {
    std::string file = name;
    std::replace(file.begin(), file.end(), '/', '_');
    const std::string path = (dir / "plots" / (file + ".png")).string();
    plot_series(path, pts);
    out.push_back(path);
  }
  return out;
}

}  // namespace kdgan
