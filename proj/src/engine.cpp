// SPDX-License-Identifier: Apache-2.0
#include "kdgan/engine.hpp"

#include <cmath>

#include "kdgan/agkd.hpp"
#include "kdgan/cgkd.hpp"

namespace kdgan {
namespace {

using ad::Var;

void put_params(CheckpointRecord& r, const std::string& prefix, const ParamSet& p) {
  for (std::size_t i = 0; i < p.size(); ++i) r.arrays.emplace_back(prefix + p.name(i), p.value(i));
}

void put_moments(CheckpointRecord& r, const std::string& prefix, const ParamSet& p,
                 const std::vector<Matrix>& m) {
  for (std::size_t i = 0; i < p.size(); ++i) r.arrays.emplace_back(prefix + p.name(i), m[i]);
}

void load_into(const CheckpointRecord& r, const std::string& prefix, const ParamSet& shape,
               std::vector<Matrix*> targets) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const Matrix& src = r.array(prefix + shape.name(i));
    if (src.rows() != targets[i]->rows() || src.cols() != targets[i]->cols())
      throw ConfigError("checkpoint array '" + prefix + shape.name(i) + "' has shape " +
                        shape_string(src) + ", expected " + shape_string(*targets[i]));
    *targets[i] = src;
  }
}

}  // namespace

std::vector<std::string> prompt_labels(const TrainConfig& cfg, const Dataset& data) {
  return cfg.cgkd.text_labels.empty() ? data.class_names : cfg.cgkd.text_labels;
}

Trainer::Trainer(const TrainConfig& cfg, std::shared_ptr<const Dataset> data,
                 std::shared_ptr<const TeacherModel> teacher)
    : cfg_(cfg),
      data_(std::move(data)),
      teacher_(std::move(teacher)),
      batch_rng_(cfg.train.master_seed, "batch"),
      noise_rng_(cfg.train.master_seed, "noise"),
      gate_rng_(cfg.train.master_seed, "gate"),
      augment_rng_(cfg.train.master_seed, "augment") {
  cfg_.validate();
  if (!data_ || data_->size() == 0) throw ConfigError("training data is empty");
  if (!teacher_) throw ConfigError("a teacher model is required");
  arch_ = cfg_.arch(data_->num_classes());
  arch_.validate();
  if (data_->shape.size() != arch_.image.size())
    throw ConfigError("dataset images are " + std::to_string(data_->shape.size()) +
                      " values, model expects " + std::to_string(arch_.image.size()));
  if (teacher_->feature_dim() != arch_.teacher_dim)
    throw ConfigError("teacher feature_dim does not match the projection head");
  weights_ = cfg_.loss_weights();
  d_kind_ = cfg_.d_loss_kind();
  g_kind_ = cfg_.g_loss_kind();
  augment_ = cfg_.augment_policy();
  if (weights_.cgkd_kd != 0.0 || weights_.cgkd_pd != 0.0) {
    auto labels = prompt_labels(cfg_, *data_);
    if (labels.size() < 2) throw ConfigError("CGKD needs at least 2 text labels");
    texts_ = teacher_->encode_texts(texts_from_labels(labels, PromptTemplate(cfg_.cgkd.prompt_template)));
  }
  params_ = init_params(arch_, cfg_.train.master_seed);
  adam_g_ = Adam(params_.g, {cfg_.optim.g_lr, cfg_.optim.beta1, cfg_.optim.beta2, cfg_.optim.eps});
  adam_d_ = Adam(params_.d, {cfg_.optim.d_lr, cfg_.optim.beta1, cfg_.optim.beta2, cfg_.optim.eps});
}

std::vector<Index> Trainer::draw_batch() {
  std::vector<Index> rows(static_cast<std::size_t>(cfg_.train.batch_size));
  const int n = static_cast<int>(data_->size());
  for (auto& r : rows) r = batch_rng_.uniform_int(0, n - 1);
  return rows;
}

std::vector<int> Trainer::fake_labels() {
  if (!arch_.conditional) return {};
  std::vector<int> y(static_cast<std::size_t>(cfg_.train.batch_size));
  for (auto& v : y) v = noise_rng_.uniform_int(0, arch_.num_classes - 1);
  return y;
}

void Trainer::d_update(StepMetrics& m, int& gate_open, int& gate_draws) {
  const Index b = cfg_.train.batch_size;
  ImageBatch real = data_->gather(draw_batch(), arch_.conditional);
  NoiseBatch z = sample_noise(noise_rng_, b, arch_.latent_dim);
  std::vector<int> labels = fake_labels();
  Matrix fake = generate(arch_, params_.g, z, labels).data;

  Var real_in = Var::constant(real.data), fake_in = Var::constant(fake);
  if (augment_ == AugmentPolicy::basic) {
    // One draw shared by the real and fake halves.
    AugmentDraw draw = draw_augment(augment_rng_, b, arch_.image);
    real_in = apply_augment(real_in, arch_.image, draw);
    fake_in = apply_augment(fake_in, arch_.image, draw);
  }

  BoundParams d(params_.d, true);
  DiscriminatorVars dr = discriminate(arch_, d, real_in, real.labels);
  DiscriminatorVars df = discriminate(arch_, d, fake_in, labels);
  Var adv = adversarial::d_adv_loss({dr.scores, df.scores, adversarial::ScoreKind::logits}, d_kind_);

  std::optional<Var> agkd_total, cgkd_kd;
  if (weights_.agkd != 0.0 || weights_.cgkd_kd != 0.0) {
    // Teacher features are constants for the discriminator update.
    Var t_fake = Var::constant(teacher_->encode_images(Var::constant(fake)).value());
    if (weights_.agkd != 0.0) {
      Var t_real = Var::constant(teacher_->encode_images(Var::constant(real.data)).value());
      agkd::AgkdTerms t = agkd::total({t_real, t_fake, dr.projected, df.projected},
                                      {cfg_.agkd.p, &gate_rng_}, cfg_.agkd.agg_weight);
      agkd_total = t.l_total;
      ++gate_draws;
      gate_open += t.gate_open ? 1 : 0;
      m.values["agkd/l_kd"] = t.l_kd.item();
      m.values["agkd/l_agg"] = t.l_agg_raw.item();
    }
    if (weights_.cgkd_kd != 0.0) {
      auto ct = cgkd::build_correlation(t_fake, texts_, cgkd::Source::teacher);
      auto cs = cgkd::build_correlation(df.projected, texts_, cgkd::Source::student);
      cgkd_kd = cgkd::correlation_kd_loss(ct, cs);
    }
  }
  Var obj = adversarial::discriminator_objective(adv, agkd_total ? &*agkd_total : nullptr,
                                                 cgkd_kd ? &*cgkd_kd : nullptr, weights_, &m.values);
  m.values["d_loss"] = obj.item();
  ad::backward(obj);
  std::vector<Matrix> grads = d.grads();
  m.values["grad_norm/d"] = global_norm(grads);
  adam_d_.step(params_.d, grads);
}

void Trainer::g_update(StepMetrics& m) {
  const Index b = cfg_.train.batch_size;
  NoiseBatch z = sample_noise(noise_rng_, b, arch_.latent_dim);
  std::vector<int> labels = fake_labels();
  BoundParams g(params_.g, true);
  Var fake = generate(arch_, g, Var::constant(z.data), labels);
  Var fake_in = fake;
  if (augment_ == AugmentPolicy::basic)
    fake_in = apply_augment(fake, arch_.image, draw_augment(augment_rng_, b, arch_.image));

  BoundParams d(params_.d, false);
  DiscriminatorVars df = discriminate(arch_, d, fake_in, labels);
  Var adv = adversarial::g_adv_loss(df.scores, adversarial::ScoreKind::logits, g_kind_);

  std::optional<Var> pd, kd;
  const bool kd_to_g = weights_.cgkd_kd != 0.0 && weights_.cgkd_kd_to_generator;
  if (weights_.cgkd_pd != 0.0 || kd_to_g) {
    auto ct = cgkd::build_correlation(teacher_->encode_images(fake), texts_, cgkd::Source::teacher);
    if (weights_.cgkd_pd != 0.0) pd = cgkd::pairwise_diversity_loss(ct, cfg_.cgkd.ordered_pairs);
    if (kd_to_g) {
      auto cs = cgkd::build_correlation(ad::detach(df.projected), texts_, cgkd::Source::student);
      kd = cgkd::correlation_kd_loss(ct, cs);
    }
  }
  Var obj = adversarial::generator_objective(adv, pd ? &*pd : nullptr, kd ? &*kd : nullptr,
                                             weights_, &m.values);
  m.values["g_loss"] = obj.item();
  ad::backward(obj);
  std::vector<Matrix> grads = g.grads();
  m.values["grad_norm/g"] = global_norm(grads);
  adam_g_.step(params_.g, grads);
}

StepMetrics Trainer::train_step() {
  StepMetrics m;
  m.step = step_ + 1;
  int gate_open = 0, gate_draws = 0;
  try {
    for (int k = 0; k < cfg_.train.d_steps_per_g_step; ++k) d_update(m, gate_open, gate_draws);
    g_update(m);
  } catch (const NumericFailure& e) {
    throw TrainingFailure(std::string(e.what()) + " at step " + std::to_string(m.step), m.step,
                          m.values);
  } catch (const DegenerateInput& e) {
    throw TrainingFailure(std::string(e.what()) + " at step " + std::to_string(m.step), m.step,
                          m.values);
  }
  for (const auto& [k, v] : m.values)
    if (!std::isfinite(v))
      throw TrainingFailure("metric '" + k + "' is not finite at step " + std::to_string(m.step),
                            m.step, m.values);
  for (const ParamSet* set : {&params_.g, &params_.d})
    for (std::size_t i = 0; i < set->size(); ++i)
      if (!set->value(i).allFinite())
        throw TrainingFailure("parameter '" + set->name(i) + "' is not finite after step " +
                                  std::to_string(m.step),
                              m.step, m.values);
  if (gate_draws > 0) m.values["agkd/gate_open"] = static_cast<double>(gate_open) / gate_draws;
  ++step_;
  return m;
}

CheckpointRecord Trainer::checkpoint() const {
  CheckpointRecord r;
  r.step = step_;
  r.config_json = cfg_.dump();
  r.config_hash = cfg_.hash();
  r.rng_states = {{"batch", batch_rng_.save_state()},
                  {"noise", noise_rng_.save_state()},
                  {"gate", gate_rng_.save_state()},
                  {"augment", augment_rng_.save_state()}};
  r.counters = {{"adam.g.t", adam_g_.t()}, {"adam.d.t", adam_d_.t()}};
  put_params(r, "g/", params_.g);
  put_params(r, "d/", params_.d);
  put_moments(r, "adam.g.m/", params_.g, adam_g_.m());
  put_moments(r, "adam.g.v/", params_.g, adam_g_.v());
  put_moments(r, "adam.d.m/", params_.d, adam_d_.m());
  put_moments(r, "adam.d.v/", params_.d, adam_d_.v());
  return r;
}

void Trainer::restore(const CheckpointRecord& r) {
  TrainConfig saved = TrainConfig::from_json_text(r.config_json, "checkpoint config");
  auto conflicts = resume_conflicts(saved, cfg_);
  if (!conflicts.empty()) {
    std::string keys;
    for (const auto& k : conflicts) keys += (keys.empty() ? "" : ", ") + k;
    throw ConfigError("checkpoint config differs from the current config in: " + keys);
  }
  auto ptrs = [](ParamSet& p) {
    std::vector<Matrix*> out;
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back(&p.value(i));
    return out;
  };
  auto mptrs = [](std::vector<Matrix>& v) {
    std::vector<Matrix*> out;
    for (auto& m : v) out.push_back(&m);
    return out;
  };
  GanParams p = params_;
  Adam ag = adam_g_, adm = adam_d_;
  load_into(r, "g/", p.g, ptrs(p.g));
  load_into(r, "d/", p.d, ptrs(p.d));
  load_into(r, "adam.g.m/", p.g, mptrs(ag.m()));
  load_into(r, "adam.g.v/", p.g, mptrs(ag.v()));
  load_into(r, "adam.d.m/", p.d, mptrs(adm.m()));
  load_into(r, "adam.d.v/", p.d, mptrs(adm.v()));
  ag.set_t(r.counters.at("adam.g.t"));
  adm.set_t(r.counters.at("adam.d.t"));
  batch_rng_.load_state(r.rng_states.at("batch"));
  noise_rng_.load_state(r.rng_states.at("noise"));
  gate_rng_.load_state(r.rng_states.at("gate"));
  augment_rng_.load_state(r.rng_states.at("augment"));
  params_ = std::move(p);
  adam_g_ = std::move(ag);
  adam_d_ = std::move(adm);
  step_ = r.step;
}

}  // namespace kdgan
