// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "kdgan/checkpoint.hpp"
#include "kdgan/config.hpp"
#include "kdgan/data.hpp"
#include "kdgan/optim.hpp"
#include "kdgan/teacher.hpp"

namespace kdgan {

struct StepMetrics {
  std::int64_t step = 0;
  /// Loss components ("d/adv", "g/cgkd_pd", ...), "d_loss", "g_loss",
  /// "grad_norm/d", "grad_norm/g" and, when AGKD is active, "agkd/gate_open".
  std::map<std::string, double> values;
};

/// A non-finite loss. Carries the components computed before the failure.
class TrainingFailure : public NumericFailure {
 public:
  TrainingFailure(const std::string& what, std::int64_t step, std::map<std::string, double> parts)
      : NumericFailure(what), step_(step), components_(std::move(parts)) {}
  std::int64_t step() const { return step_; }
  const std::map<std::string, double>& components() const { return components_; }

 private:
  std::int64_t step_;
  std::map<std::string, double> components_;
};

/// Owns parameters, optimizer state and the named random streams of one run.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::shared_ptr<const Dataset> data,
          std::shared_ptr<const TeacherModel> teacher);

  /// d_steps_per_g_step discriminator updates, then one generator update.
  StepMetrics train_step();

  std::int64_t step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  const GanArch& arch() const { return arch_; }
  const GanParams& params() const { return params_; }
  const Dataset& data() const { return *data_; }
  const TeacherModel& teacher() const { return *teacher_; }
  /// Text embeddings of the class prompts; empty when CGKD is inactive.
  const TextFeatureSet& texts() const { return texts_; }

  CheckpointRecord checkpoint() const;
  /// Throws ConfigError when the checkpoint came from an incompatible config.
  void restore(const CheckpointRecord& record);

 private:
  std::vector<int> fake_labels();
  std::vector<Index> draw_batch();
  void d_update(StepMetrics& m, int& gate_open, int& gate_draws);
  void g_update(StepMetrics& m);

  TrainConfig cfg_;
  GanArch arch_;
  adversarial::LossWeights weights_;
  adversarial::DLossKind d_kind_;
  adversarial::GLossKind g_kind_;
  AugmentPolicy augment_;
  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const TeacherModel> teacher_;
  TextFeatureSet texts_;

  GanParams params_;
  Adam adam_g_, adam_d_;
  std::int64_t step_ = 0;
  RngStream batch_rng_, noise_rng_, gate_rng_, augment_rng_;
};

/// Class labels the CGKD prompts are built from.
std::vector<std::string> prompt_labels(const TrainConfig& cfg, const Dataset& data);

}  // namespace kdgan
