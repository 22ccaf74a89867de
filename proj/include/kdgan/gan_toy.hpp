// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kdgan/autodiff.hpp"
#include "kdgan/rng.hpp"
#include "kdgan/tensor.hpp"

namespace kdgan {

/// Ordered, named parameter matrices of one network.
class ParamSet {
 public:
  void add(const std::string& name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return lookup_.count(name) > 0; }

  /// Total number of scalar parameters.
  Index count() const;
  std::uint64_t hash() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, std::size_t> lookup_;
};

/// A ParamSet bound to autodiff leaves for one forward/backward pass.
class BoundParams {
 public:
  BoundParams(const ParamSet& set, bool requires_grad);
  /// Binds caller-supplied variables, one per entry of `set` in order.
  BoundParams(const ParamSet& set, std::vector<ad::Var> vars);

  const ad::Var& operator[](const std::string& name) const { return vars_[set_->index(name)]; }
  const ad::Var& var(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }
  /// Gradients in ParamSet order after ad::backward.
  std::vector<Matrix> grads() const;

 private:
  const ParamSet* set_;
  std::vector<ad::Var> vars_;
};

enum class ModelKind { dense, conv };

/// Toy generator/discriminator architecture.
///
/// dense (any image size):
///   G: [z | emb(y)] -> fc(H) -> lrelu -> fc(H) -> lrelu -> fc(C*S*S) -> tanh
///   D: x -> fc(H) -> lrelu -> fc(F) -> lrelu = features
/// conv (image size divisible by 8):
///   G: [z | emb(y)] -> fc(H*s*s) -> lrelu -> 3 x [up2, conv3x3, lrelu] -> conv3x3(C) -> tanh
///   D: x -> 3 x [conv3x3 stride 2, lrelu] -> fc(F) -> lrelu = features
/// with s = S/8 and block channels H, max(H/2,8), max(H/4,8).
/// Both: score = fc([features | emb(y)]) -> 1, projected = normalize(fc(features) -> M).
/// Label embeddings have latent_dim columns in G and F columns in D.
struct GanArch {
  ModelKind kind = ModelKind::dense;
  ImageShape image;
  Index latent_dim = 16;
  Index hidden_dim = 64;
  Index feature_dim = 32;  // F
  Index teacher_dim = 16;  // M
  bool conditional = false;
  int num_classes = 0;

  void validate() const;
};

struct GanParams {
  ParamSet g;
  ParamSet d;
};

/// Deterministic initialization from `seed`.
GanParams init_params(const GanArch& arch, std::uint64_t seed);

/// Closed-form parameter counts for the documented architecture.
Index expected_generator_params(const GanArch& arch);
Index expected_discriminator_params(const GanArch& arch);

struct NoiseBatch {
  Matrix data;  // [B x Z], standard normal
};

NoiseBatch sample_noise(RngStream& stream, Index batch, Index latent_dim);

/// Images in [-1, 1] as [B x C*H*W].
ad::Var generate(const GanArch& arch, const BoundParams& g, const ad::Var& z,
                 const std::vector<int>& labels);
ImageBatch generate(const GanArch& arch, const ParamSet& g, const NoiseBatch& z,
                    const std::vector<int>& labels = {});

struct DiscriminatorVars {
  ad::Var scores;     // [B x 1] logits
  ad::Var features;   // [B x F], activations feeding the score head
  ad::Var projected;  // [B x M], row-normalized
};

struct DiscriminatorOutput {
  Matrix scores;
  FeatureBatch features;
  FeatureBatch projected;
};

DiscriminatorVars discriminate(const GanArch& arch, const BoundParams& d, const ad::Var& images,
                               const std::vector<int>& labels);
DiscriminatorOutput discriminate(const GanArch& arch, const ParamSet& d, const ImageBatch& images);

/// One-hot [B x classes] matrix.
Matrix one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace kdgan
