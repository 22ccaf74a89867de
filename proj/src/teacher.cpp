// SPDX-License-Identifier: Apache-2.0
#include "kdgan/teacher.hpp"

#include <cmath>
#include <set>

#include "kdgan/errors.hpp"
#include "kdgan/numerics.hpp"
#include "kdgan/rng.hpp"

namespace kdgan {

FeatureBatch TeacherModel::encode_images(const ImageBatch& batch) const {
  return FeatureBatch(encode_images(ad::Var::constant(batch.data)).value());
}

MockTeacher::MockTeacher(const MockTeacherSpec& spec) : spec_(spec) {
  if (spec_.feature_dim < 2)
    throw InvalidArgument("mock teacher needs feature_dim >= 2, got " +
                          std::to_string(spec_.feature_dim));
  if (spec_.hidden_dim < 1) throw InvalidArgument("mock teacher needs hidden_dim >= 1");
  if (spec_.input_shape.channels < 1 || spec_.input_shape.height < 1 ||
      spec_.input_shape.width < 1)
    throw InvalidArgument("mock teacher needs a non-empty input shape");

  RngStream rng(spec_.seed, "teacher.image");
  const Index d = spec_.input_shape.size();
  // Gain 2 on the first layer keeps tanh out of its linear regime on [-1,1] pixels.
  w1_ = rng.normal_matrix(d, spec_.hidden_dim) * (2.0 / std::sqrt(static_cast<double>(d)));
  b1_ = rng.normal_matrix(1, spec_.hidden_dim).row(0) * 0.5;
  w2_ = rng.normal_matrix(spec_.hidden_dim, spec_.feature_dim) /
        std::sqrt(static_cast<double>(spec_.hidden_dim));
}

ad::Var MockTeacher::encode_images(const ad::Var& images) const {
  if (images.cols() != spec_.input_shape.size())
    throw InvalidArgument("teacher expects " + std::to_string(spec_.input_shape.size()) +
                          " pixels per image, got " + shape_string(images.value()));
  using namespace ad;
  Var h = tanh(add_row(matmul(images, Var::constant(w1_)), Var::constant(b1_)));
  return row_l2_normalize(matmul(h, Var::constant(w2_)));
}

TextFeatureSet MockTeacher::encode_texts(const std::vector<std::string>& texts) const {
  if (texts.empty()) throw InvalidArgument("encode_texts: no texts");
  Matrix t(static_cast<Index>(texts.size()), spec_.feature_dim);
  for (std::size_t k = 0; k < texts.size(); ++k) {
    RngStream rng(spec_.seed, "teacher.text/" + texts[k]);
    for (Index j = 0; j < spec_.feature_dim; ++j) t(static_cast<Index>(k), j) = rng.normal();
  }
  return TextFeatureSet(row_l2_normalize(t), texts);
}

std::shared_ptr<const TeacherModel> build_mock_teacher(const MockTeacherSpec& spec) {
  return std::make_shared<const MockTeacher>(spec);
}

PromptTemplate::PromptTemplate(std::string tpl) : tpl_(std::move(tpl)) {
  const auto first = tpl_.find(kPlaceholder);
  if (first == std::string::npos)
    throw InvalidArgument("prompt template '" + tpl_ + "' has no {label} placeholder");
  if (tpl_.find(kPlaceholder, first + 1) != std::string::npos)
    throw InvalidArgument("prompt template '" + tpl_ + "' has more than one {label} placeholder");
}

std::string PromptTemplate::render(const std::string& label) const {
  std::string out = tpl_;
  out.replace(out.find(kPlaceholder), std::char_traits<char>::length(kPlaceholder), label);
  return out;
}

std::vector<std::string> texts_from_labels(const std::vector<std::string>& labels,
                                           const PromptTemplate& tpl) {
  if (labels.empty()) throw InvalidArgument("texts_from_labels: no labels");
  std::set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    if (!seen.insert(label).second) throw InvalidArgument("duplicate label '" + label + "'");
    out.push_back(tpl.render(label));
  }
  return out;
}

bool freeze_check(const TeacherModel& teacher, const ImageBatch& probe) {
  const Matrix a = teacher.encode_images(ad::Var::constant(probe.data)).value();
  const Matrix b = teacher.encode_images(ad::Var::constant(probe.data)).value();
  return hash_matrix(a) == hash_matrix(b) && a == b;
}

std::uint64_t teacher_fingerprint(const TeacherModel& teacher, const ImageBatch& probe) {
  return hash_matrix(teacher.encode_images(ad::Var::constant(probe.data)).value());
}

TeacherRegistry& TeacherRegistry::instance() {
  static TeacherRegistry registry;
  return registry;
}

TeacherRegistry::TeacherRegistry() {
  factories_["mock"] = [](const TeacherConfig& cfg, const ImageShape& shape) {
    return build_mock_teacher(MockTeacherSpec{cfg.seed, cfg.feature_dim, cfg.hidden_dim, shape});
  };
}

void TeacherRegistry::register_factory(const std::string& kind, TeacherFactory factory) {
  factories_[kind] = std::move(factory);
}

bool TeacherRegistry::has(const std::string& kind) const { return factories_.count(kind) > 0; }

std::shared_ptr<const TeacherModel> TeacherRegistry::create(const TeacherConfig& cfg,
                                                            const ImageShape& input_shape) const {
  auto it = factories_.find(cfg.kind);
  if (it == factories_.end())
    throw InvalidArgument("no teacher adapter registered for teacher.kind='" + cfg.kind + "'");
  auto teacher = it->second(cfg, input_shape);
  if (teacher->feature_dim() != cfg.feature_dim)
    throw InvalidArgument("teacher reports feature_dim " + std::to_string(teacher->feature_dim()) +
                          " but teacher.feature_dim is " + std::to_string(cfg.feature_dim));
  ImageBatch probe{Matrix::Zero(2, input_shape.size()), input_shape, {}};
  probe.data.row(1).setConstant(0.5);
  if (!freeze_check(*teacher, probe))
    throw InvalidArgument("teacher '" + cfg.kind + "' failed the freeze check");
  return teacher;
}

}  // namespace kdgan
