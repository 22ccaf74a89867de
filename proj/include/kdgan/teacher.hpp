// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kdgan/autodiff.hpp"
#include "kdgan/tensor.hpp"

namespace kdgan {

/// A frozen vision-language encoder pair.
///
/// Image features are differentiable with respect to the image input and
/// carry no trainable state. Both encoders return row-L2-normalized features.
class TeacherModel {
 public:
  virtual ~TeacherModel() = default;

  virtual Index feature_dim() const = 0;
  virtual ImageShape input_shape() const = 0;

  /// [B x C*H*W] -> [B x M]
  virtual ad::Var encode_images(const ad::Var& images) const = 0;
  virtual TextFeatureSet encode_texts(const std::vector<std::string>& texts) const = 0;

  FeatureBatch encode_images(const ImageBatch& batch) const;
};

struct MockTeacherSpec {
  std::uint64_t seed = 1234;
  Index feature_dim = 16;
  Index hidden_dim = 64;
  ImageShape input_shape;
};

/// flatten -> linear -> tanh -> linear -> row L2 normalize, with weights drawn
/// once from `seed`. Text vectors are seeded per label string.
class MockTeacher final : public TeacherModel {
 public:
  explicit MockTeacher(const MockTeacherSpec& spec);

  Index feature_dim() const override { return spec_.feature_dim; }
  ImageShape input_shape() const override { return spec_.input_shape; }
  ad::Var encode_images(const ad::Var& images) const override;
  TextFeatureSet encode_texts(const std::vector<std::string>& texts) const override;
  using TeacherModel::encode_images;

  const MockTeacherSpec& spec() const { return spec_; }

 private:
  MockTeacherSpec spec_;
  Matrix w1_;  // [D x hidden]
  RowVector b1_;
  Matrix w2_;  // [hidden x M]
};

std::shared_ptr<const TeacherModel> build_mock_teacher(const MockTeacherSpec& spec);

class PromptTemplate {
 public:
  static constexpr const char* kPlaceholder = "{label}";

  explicit PromptTemplate(std::string tpl = "a photo of a {label}");
  std::string render(const std::string& label) const;
  const std::string& text() const { return tpl_; }

 private:
  std::string tpl_;
};

std::vector<std::string> texts_from_labels(const std::vector<std::string>& labels,
                                           const PromptTemplate& tpl);

/// True iff two consecutive encodes of `probe` are bit-identical.
bool freeze_check(const TeacherModel& teacher, const ImageBatch& probe);

/// Hash of the teacher's features on `probe`; used to detect drift across training.
std::uint64_t teacher_fingerprint(const TeacherModel& teacher, const ImageBatch& probe);

/// Settings read from the `teacher.*` configuration keys.
struct TeacherConfig {
  std::string kind = "mock";  // mock | external
  Index feature_dim = 16;
  Index hidden_dim = 64;
  std::uint64_t seed = 1234;
  std::string checkpoint_path;
};

using TeacherFactory =
    std::function<std::shared_ptr<const TeacherModel>(const TeacherConfig&, const ImageShape&)>;

/// Adapters for real pretrained encoders register here under `teacher.kind`.
/// `mock` is always available.
class TeacherRegistry {
 public:
  static TeacherRegistry& instance();

  void register_factory(const std::string& kind, TeacherFactory factory);
  bool has(const std::string& kind) const;
  /// Builds the teacher and verifies freeze_check on a probe batch.
  std::shared_ptr<const TeacherModel> create(const TeacherConfig& cfg,
                                             const ImageShape& input_shape) const;

 private:
  TeacherRegistry();
  std::map<std::string, TeacherFactory> factories_;
};

}  // namespace kdgan
