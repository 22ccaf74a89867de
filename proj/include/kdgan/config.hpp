// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kdgan/adversarial.hpp"
#include "kdgan/data.hpp"
#include "kdgan/errors.hpp"
#include "kdgan/gan_toy.hpp"
#include "kdgan/teacher.hpp"

namespace kdgan {

/// Raised for malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct AgkdConfig {
  bool enabled = true;
  double p = 0.7;
  double weight = 1.0;
  double agg_weight = 1.0;
};

struct CgkdConfig {
  bool enabled = true;
  double weight = 1.0;
  double pd_weight = 1.0;
  bool ordered_pairs = true;
  bool stop_teacher_grad_in_kd = false;
  std::string prompt_template = "a photo of a {label}";
  std::vector<std::string> text_labels;  // empty: dataset class names
};

struct AdvConfig {
  std::string kind = "logistic";
  std::string g_variant;  // empty: nonsaturating for logistic, hinge for hinge
};

struct LossConfig {
  double w_agkd = 1.0;
  double w_cgkd = 1.0;
  double w_pd = 1.0;
};

struct ModelConfig {
  std::string kind = "dense";
  int image_size = 8;
  int channels = 1;
  int latent_dim = 16;
  bool conditional = false;
  int feature_dim_F = 32;
  int hidden_dim = 64;
};

struct DataConfig {
  std::string format = "synthetic_modes";
  std::string root;
  double fraction = 1.0;
  std::uint64_t subset_seed = 0;
  std::string augment = "none";
  int num_modes = 8;
  int samples_per_mode = 100;
  std::uint64_t synthetic_seed = 7;
  double jitter = 0.1;
  std::vector<std::string> class_names;
};

struct ScheduleConfig {
  int steps = 2000;
  int batch_size = 32;
  int d_steps_per_g_step = 1;
  int eval_every = 500;
  int checkpoint_every = 500;
  int sample_every = 500;
  std::uint64_t master_seed = 0;
};

struct OptimConfig {
  double g_lr = 2e-4;
  double d_lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct EvalConfig {
  int num_samples = 512;
  int diversity_pairs = 256;
};

struct RunConfig {
  std::string out_root = "runs";
  std::string name = "default";
};

/// Complete experiment description. Serialized as one flat JSON object with
/// dotted keys ("agkd.p", "train.steps", ...); unknown keys are rejected.
struct TrainConfig {
  TeacherConfig teacher;
  AgkdConfig agkd;
  CgkdConfig cgkd;
  AdvConfig adv;
  LossConfig loss;
  ModelConfig model;
  DataConfig data;
  ScheduleConfig train;
  OptimConfig optim;
  EvalConfig eval;
  RunConfig run;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Canonical JSON text (sorted keys, round-trip doubles).
  std::string dump() const;
  std::uint64_t hash() const;

  static TrainConfig from_json_text(const std::string& text, const std::string& origin = "config");
  /// Missing or unreadable files raise ConfigError naming the path.
  static TrainConfig from_file(const std::string& path);

  /// Overlays only the keys present in `text` onto this config.
  void merge_json_text(const std::string& text, const std::string& origin);

  // Derived settings.
  GanArch arch(int num_classes) const;
  DatasetSpec dataset_spec() const;
  adversarial::LossWeights loss_weights() const;
  adversarial::DLossKind d_loss_kind() const;
  adversarial::GLossKind g_loss_kind() const;
  AugmentPolicy augment_policy() const;
};

/// Keys whose values may differ between a checkpoint and the resuming run.
bool resume_may_differ(const std::string& key);

/// Keys of `a` and `b` that differ, ignoring resume_may_differ keys.
std::vector<std::string> resume_conflicts(const TrainConfig& a, const TrainConfig& b);

}  // namespace kdgan
