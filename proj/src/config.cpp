// SPDX-License-Identifier: Apache-2.0
#include "kdgan/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kdgan {
namespace {

using json = nlohmann::json;

struct Field {
  std::function<json()> get;
  std::function<void(const json&, const std::string&)> set;
};

[[noreturn]] void type_error(const std::string& key, const char* expected, const json& v) {
  throw ConfigError("config key '" + key + "' expects " + expected + ", got " + v.dump());
}

template <typename T>
Field bind(T& field) {
  Field f;
  f.get = [&field] { return json(field); };
  f.set = [&field](const json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) type_error(key, "a boolean", v);
      field = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) type_error(key, "a number", v);
      field = v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) type_error(key, "a non-negative integer", v);
      field = v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) type_error(key, "an integer", v);
      field = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) type_error(key, "a string", v);
      field = v.get<std::string>();
    } else {
      if (!v.is_array()) type_error(key, "a list of strings", v);
      T out;
      for (const auto& e : v) {
        if (!e.is_string()) type_error(key, "a list of strings", v);
        out.push_back(e.get<std::string>());
      }
      field = std::move(out);
    }
  };
  return f;
}

std::map<std::string, Field> fields(TrainConfig& c) {
  return {
      {"teacher.kind", bind(c.teacher.kind)},
      {"teacher.feature_dim", bind(c.teacher.feature_dim)},
      {"teacher.hidden_dim", bind(c.teacher.hidden_dim)},
      {"teacher.seed", bind(c.teacher.seed)},
      {"teacher.checkpoint_path", bind(c.teacher.checkpoint_path)},
      {"agkd.enabled", bind(c.agkd.enabled)},
      {"agkd.p", bind(c.agkd.p)},
      {"agkd.weight", bind(c.agkd.weight)},
      {"agkd.agg_weight", bind(c.agkd.agg_weight)},
      {"cgkd.enabled", bind(c.cgkd.enabled)},
      {"cgkd.weight", bind(c.cgkd.weight)},
      {"cgkd.pd_weight", bind(c.cgkd.pd_weight)},
      {"cgkd.ordered_pairs", bind(c.cgkd.ordered_pairs)},
      {"cgkd.stop_teacher_grad_in_kd", bind(c.cgkd.stop_teacher_grad_in_kd)},
      {"cgkd.prompt_template", bind(c.cgkd.prompt_template)},
      {"cgkd.text_labels", bind(c.cgkd.text_labels)},
      {"adv.kind", bind(c.adv.kind)},
      {"adv.g_variant", bind(c.adv.g_variant)},
      {"loss.w_agkd", bind(c.loss.w_agkd)},
      {"loss.w_cgkd", bind(c.loss.w_cgkd)},
      {"loss.w_pd", bind(c.loss.w_pd)},
      {"model.kind", bind(c.model.kind)},
      {"model.image_size", bind(c.model.image_size)},
      {"model.channels", bind(c.model.channels)},
      {"model.latent_dim", bind(c.model.latent_dim)},
      {"model.conditional", bind(c.model.conditional)},
      {"model.feature_dim_F", bind(c.model.feature_dim_F)},
      {"model.hidden_dim", bind(c.model.hidden_dim)},
      {"data.format", bind(c.data.format)},
      {"data.root", bind(c.data.root)},
      {"data.fraction", bind(c.data.fraction)},
      {"data.subset_seed", bind(c.data.subset_seed)},
      {"data.augment", bind(c.data.augment)},
      {"data.num_modes", bind(c.data.num_modes)},
      {"data.samples_per_mode", bind(c.data.samples_per_mode)},
      {"data.synthetic_seed", bind(c.data.synthetic_seed)},
      {"data.jitter", bind(c.data.jitter)},
      {"data.class_names", bind(c.data.class_names)},
      {"train.steps", bind(c.train.steps)},
      {"train.batch_size", bind(c.train.batch_size)},
      {"train.d_steps_per_g_step", bind(c.train.d_steps_per_g_step)},
      {"train.eval_every", bind(c.train.eval_every)},
      {"train.checkpoint_every", bind(c.train.checkpoint_every)},
      {"train.sample_every", bind(c.train.sample_every)},
      {"train.master_seed", bind(c.train.master_seed)},
      {"optim.g_lr", bind(c.optim.g_lr)},
      {"optim.d_lr", bind(c.optim.d_lr)},
      {"optim.beta1", bind(c.optim.beta1)},
      {"optim.beta2", bind(c.optim.beta2)},
      {"optim.eps", bind(c.optim.eps)},
      {"eval.num_samples", bind(c.eval.num_samples)},
      {"eval.diversity_pairs", bind(c.eval.diversity_pairs)},
      {"run.out_root", bind(c.run.out_root)},
      {"run.name", bind(c.run.name)},
  };
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

json to_json(const TrainConfig& c) {
  json out = json::object();
  for (auto& [k, f] : fields(const_cast<TrainConfig&>(c))) out[k] = f.get();
  return out;
}

}  // namespace

void TrainConfig::merge_json_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": expected a flat JSON object");
  auto table = fields(*this);
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(origin + ": unknown config key '" + key + "'");
    it->second.set(value, key);
  }
}

TrainConfig TrainConfig::from_json_text(const std::string& text, const std::string& origin) {
  TrainConfig c;
  c.merge_json_text(text, origin);
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path);
}

std::string TrainConfig::dump() const { return to_json(*this).dump(2); }

std::uint64_t TrainConfig::hash() const { return hash_string(to_json(*this).dump()); }

void TrainConfig::validate() const {
  require(teacher.kind == "mock" || teacher.kind == "external" ||
              TeacherRegistry::instance().has(teacher.kind),
          "teacher.kind must be mock or a registered adapter, got '" + teacher.kind + "'");
  require(teacher.feature_dim >= 2, "teacher.feature_dim must be >= 2");
  require(teacher.hidden_dim >= 1, "teacher.hidden_dim must be >= 1");
  require(agkd.p >= 0.0 && agkd.p <= 1.0, "agkd.p must lie in [0, 1]");
  require(agkd.weight >= 0.0 && agkd.agg_weight >= 0.0, "agkd weights must be >= 0");
  require(cgkd.weight >= 0.0 && cgkd.pd_weight >= 0.0, "cgkd weights must be >= 0");
  require(loss.w_agkd >= 0.0 && loss.w_cgkd >= 0.0 && loss.w_pd >= 0.0,
          "loss weights must be >= 0");
  try {
    PromptTemplate check(cgkd.prompt_template);
    (void)d_loss_kind();
    (void)g_loss_kind();
    (void)augment_policy();
    (void)parse_data_format(data.format);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  require(model.kind == "dense" || model.kind == "conv",
          "model.kind must be dense or conv, got '" + model.kind + "'");
  require(model.image_size >= 1 && model.channels >= 1 && model.latent_dim >= 1 &&
              model.feature_dim_F >= 1 && model.hidden_dim >= 1,
          "model dimensions must be positive");
  require(model.channels == 1 || model.channels == 3, "model.channels must be 1 or 3");
  require(data.fraction > 0.0 && data.fraction <= 1.0, "data.fraction must lie in (0, 1]");
  require(data.num_modes >= 1 && data.samples_per_mode >= 1, "synthetic data sizes must be positive");
  require(data.jitter >= 0.0, "data.jitter must be >= 0");
  require(data.format == "synthetic_modes" || !data.root.empty(),
          "data.root is required for format '" + data.format + "'");
  require(train.steps >= 0, "train.steps must be >= 0");
  require(train.batch_size >= 2, "train.batch_size must be >= 2");
  require(train.d_steps_per_g_step >= 1, "train.d_steps_per_g_step must be >= 1");
  require(train.eval_every >= 1 && train.checkpoint_every >= 1 && train.sample_every >= 1,
          "train.*_every must be >= 1");
  require(optim.g_lr > 0.0 && optim.d_lr > 0.0, "learning rates must be > 0");
  require(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0,
          "optim betas must lie in [0, 1)");
  require(optim.eps > 0.0, "optim.eps must be > 0");
  require(eval.num_samples >= 2, "eval.num_samples must be >= 2");
  require(eval.diversity_pairs >= 1, "eval.diversity_pairs must be >= 1");
  require(!run.name.empty(), "run.name must not be empty");
  try {
    arch(model.conditional ? 2 : 0).validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

GanArch TrainConfig::arch(int num_classes) const {
  GanArch a;
  a.kind = model.kind == "conv" ? ModelKind::conv : ModelKind::dense;
  a.image = {model.channels, model.image_size, model.image_size};
  a.latent_dim = model.latent_dim;
  a.hidden_dim = model.hidden_dim;
  a.feature_dim = model.feature_dim_F;
  a.teacher_dim = teacher.feature_dim;
  a.conditional = model.conditional;
  a.num_classes = model.conditional ? num_classes : 0;
  return a;
}

DatasetSpec TrainConfig::dataset_spec() const {
  DatasetSpec s;
  s.format = parse_data_format(data.format);
  s.root = data.root;
  s.fraction = data.fraction;
  s.subset_seed = data.subset_seed;
  s.class_names = data.class_names;
  s.shape = {model.channels, model.image_size, model.image_size};
  s.synthetic.num_modes = data.num_modes;
  s.synthetic.image_size = model.image_size;
  s.synthetic.channels = model.channels;
  s.synthetic.samples_per_mode = data.samples_per_mode;
  s.synthetic.seed = data.synthetic_seed;
  s.synthetic.jitter = data.jitter;
  return s;
}

adversarial::LossWeights TrainConfig::loss_weights() const {
  adversarial::LossWeights w;
  w.agkd = agkd.enabled ? agkd.weight * loss.w_agkd : 0.0;
  w.cgkd_kd = cgkd.enabled ? cgkd.weight * loss.w_cgkd : 0.0;
  w.cgkd_pd = cgkd.enabled ? cgkd.pd_weight * loss.w_pd : 0.0;
  w.cgkd_kd_to_generator = !cgkd.stop_teacher_grad_in_kd;
  return w;
}

adversarial::DLossKind TrainConfig::d_loss_kind() const {
  try {
    return adversarial::parse_d_kind(adv.kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

adversarial::GLossKind TrainConfig::g_loss_kind() const {
  if (adv.g_variant.empty())
    return d_loss_kind() == adversarial::DLossKind::hinge ? adversarial::GLossKind::hinge
                                                          : adversarial::GLossKind::logistic_nonsaturating;
  adversarial::GLossKind g;
  try {
    g = adversarial::parse_g_kind(adv.g_variant);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

AugmentPolicy TrainConfig::augment_policy() const {
  try {
    return parse_augment_policy(data.augment);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

bool resume_may_differ(const std::string& key) {
  return key == "train.steps" || key == "run.out_root" || key == "run.name";
}

std::vector<std::string> resume_conflicts(const TrainConfig& a, const TrainConfig& b) {
  json ja = to_json(a), jb = to_json(b);
  std::vector<std::string> out;
  for (const auto& [k, v] : ja.items())
    if (!resume_may_differ(k) && jb.at(k) != v) out.push_back(k);
  return out;
}

}  // namespace kdgan
