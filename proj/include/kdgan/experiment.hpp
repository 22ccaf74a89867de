// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kdgan/engine.hpp"
#include "kdgan/metrics.hpp"

namespace kdgan {

/// Generated-sample metrics against the full (unsubsetted) dataset, in the
/// teacher's feature space.
class Evaluator {
 public:
  Evaluator(const TrainConfig& cfg, const Dataset& full, std::shared_ptr<const TeacherModel> teacher);

  /// "eval/teacher_fid", "eval/is_style", "eval/teacher_cosine_diversity" and,
  /// for synthetic data, "eval/mode_coverage" (fraction) and "eval/modes_covered".
  std::map<std::string, double> evaluate(const GanArch& arch, const ParamSet& g) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  TrainConfig cfg_;
  std::shared_ptr<const TeacherModel> teacher_;
  metrics::FeatureStats real_stats_;
  Matrix templates_;
  TextFeatureSet class_texts_;
  int num_classes_ = 0;
  mutable std::vector<std::string> warnings_;
};

/// Appends `step,name,value,seed` rows; values printed with %.17g.
class MetricsWriter {
 public:
  /// `append` keeps existing rows (header written only for a new file).
  MetricsWriter(const std::string& path, std::uint64_t seed, bool append);
  void write(std::int64_t step, const std::map<std::string, double>& values);

 private:
  std::string path_;
  std::uint64_t seed_;
  std::ofstream out_;
};

/// Keeps the header and rows up to `step`. Evaluation rows at `step` itself
/// survive only when `keep_eval_at_step` is set.
void truncate_metrics(const std::string& path, std::int64_t step, bool keep_eval_at_step);

/// 8 x 8 grid of images with a one-pixel border, [-1, 1] mapped to [0, 255].
void write_sample_grid(const std::string& path, const ImageBatch& images);

struct RunOptions {
  std::optional<std::string> resume_checkpoint;
  bool quiet = true;
};

struct RunResult {
  std::string run_dir;
  std::int64_t final_step = 0;
  std::map<std::string, double> final_eval;
  std::uint64_t teacher_fingerprint_start = 0;
  std::uint64_t teacher_fingerprint_end = 0;
};

/// Run directory: $KD_DLGAN_RUN_DIR (if set) or run.out_root, then run.name.
std::string run_directory(const TrainConfig& cfg);

/// Trains and writes config.snapshot, metrics.csv, checkpoints/, samples/ and
/// summary.json under run_directory(cfg).
RunResult run_experiment(const TrainConfig& cfg, const RunOptions& opts = {});

struct EvalResult {
  std::int64_t step = 0;
  std::map<std::string, double> values;
  std::string csv_path;
};

/// Evaluates the generator stored in `ckpt_path`. `data_spec_path` is a flat
/// JSON file of data.* keys overriding the checkpoint's data settings.
EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& data_spec_path,
                               const std::string& out_csv = "");

/// One PNG line chart per metric name in run_dir/metrics.csv, written to
/// run_dir/plots. Returns the file paths.
std::vector<std::string> plot_run(const std::string& run_dir);

}  // namespace kdgan
