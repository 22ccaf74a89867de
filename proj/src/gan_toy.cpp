// SPDX-License-Identifier: Apache-2.0
#include "kdgan/gan_toy.hpp"

#include <cmath>

#include "kdgan/errors.hpp"

namespace kdgan {

void ParamSet::add(const std::string& name, Matrix value) {
  if (lookup_.count(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  lookup_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamSet::at(const std::string& name) const { return values_[index(name)]; }
Matrix& ParamSet::at(const std::string& name) { return values_[index(name)]; }

Index ParamSet::count() const {
  Index n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::uint64_t ParamSet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    h = fnv1a(names_[i].data(), names_[i].size(), h);
    h = hash_matrix(values_[i], h);
  }
  return h;
}

BoundParams::BoundParams(const ParamSet& set, bool requires_grad) : set_(&set) {
  vars_.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    vars_.push_back(requires_grad ? ad::Var::leaf(set.value(i)) : ad::Var::constant(set.value(i)));
}

BoundParams::BoundParams(const ParamSet& set, std::vector<ad::Var> vars)
    : set_(&set), vars_(std::move(vars)) {
  if (vars_.size() != set.size()) throw InvalidArgument("BoundParams: one variable per parameter required");
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].rows() != set.value(i).rows() || vars_[i].cols() != set.value(i).cols())
      throw InvalidArgument("BoundParams: shape mismatch for '" + set.name(i) + "'");
}

std::vector<Matrix> BoundParams::grads() const {
  std::vector<Matrix> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.grad());
  return out;
}

namespace {

struct ConvPlan {
  Index base;  // spatial size after the generator's fc layer
  Index c1, c2, c3;
};

ConvPlan conv_plan(const GanArch& a) {
  return {a.image.height / 8, a.hidden_dim, std::max<Index>(a.hidden_dim / 2, 8),
          std::max<Index>(a.hidden_dim / 4, 8)};
}

Index g_input_dim(const GanArch& a) { return a.latent_dim + (a.conditional ? a.latent_dim : 0); }

Index linear_count(Index in, Index out) { return in * out + out; }
Index conv_count(Index cin, Index cout) { return cout * cin * 9 + cout; }

Matrix init_weight(RngStream& rng, Index rows, Index cols, Index fan_in, double gain) {
  return rng.normal_matrix(rows, cols) * (gain / std::sqrt(static_cast<double>(fan_in)));
}

void add_linear(ParamSet& p, RngStream& rng, const std::string& name, Index in, Index out,
                double gain) {
  p.add(name + ".w", init_weight(rng, in, out, in, gain));
  p.add(name + ".b", Matrix::Zero(1, out));
}

void add_conv(ParamSet& p, RngStream& rng, const std::string& name, Index cin, Index cout,
              double gain) {
  p.add(name + ".w", init_weight(rng, cout, cin * 9, cin * 9, gain));
  p.add(name + ".b", Matrix::Zero(1, cout));
}

constexpr double kLreluGain = 1.4;

ad::Var linear(const BoundParams& p, const std::string& name, const ad::Var& x) {
  return ad::add_row(ad::matmul(x, p[name + ".w"]), p[name + ".b"]);
}

ad::Var conv(const BoundParams& p, const std::string& name, const ad::Var& x, ImageShape in,
             int cout, int stride) {
  return ad::conv2d(x, p[name + ".w"], p[name + ".b"], ad::ConvGeometry{in, cout, 3, stride, 1});
}

void check_labels(const GanArch& a, const std::vector<int>& labels, Index batch) {
  if (a.conditional) {
    if (static_cast<Index>(labels.size()) != batch)
      throw InvalidArgument("conditional model needs one label per sample (" +
                            std::to_string(batch) + "), got " + std::to_string(labels.size()));
    for (int y : labels)
      if (y < 0 || y >= a.num_classes)
        throw InvalidArgument("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(a.num_classes) + ")");
  } else if (!labels.empty()) {
    throw InvalidArgument("labels given to an unconditional model");
  }
}

}  // namespace

void GanArch::validate() const {
  if (image.channels < 1 || image.height < 1 || image.width < 1)
    throw InvalidArgument("model image shape must be positive");
  if (latent_dim < 1 || hidden_dim < 1 || feature_dim < 1 || teacher_dim < 2)
    throw InvalidArgument("model dims must be positive (teacher dim >= 2)");
  if (conditional && num_classes < 1)
    throw InvalidArgument("conditional model needs num_classes >= 1");
  if (kind == ModelKind::conv && (image.height != image.width || image.height % 8 != 0))
    throw InvalidArgument("conv model needs square images with size divisible by 8, got " +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
}

GanParams init_params(const GanArch& arch, std::uint64_t seed) {
  arch.validate();
  GanParams out;
  RngStream g_rng(seed, "init.generator");
  RngStream d_rng(seed, "init.discriminator");
  const Index pixels = arch.image.size();
  const Index gin = g_input_dim(arch);

  if (arch.conditional) out.g.add("g.embed", g_rng.normal_matrix(arch.num_classes, arch.latent_dim));
  if (arch.kind == ModelKind::dense) {
    add_linear(out.g, g_rng, "g.fc1", gin, arch.hidden_dim, kLreluGain);
    add_linear(out.g, g_rng, "g.fc2", arch.hidden_dim, arch.hidden_dim, kLreluGain);
    add_linear(out.g, g_rng, "g.out", arch.hidden_dim, pixels, 1.0);

    add_linear(out.d, d_rng, "d.fc1", pixels, arch.hidden_dim, kLreluGain);
    add_linear(out.d, d_rng, "d.fc2", arch.hidden_dim, arch.feature_dim, kLreluGain);
  } else {
    const ConvPlan c = conv_plan(arch);
    add_linear(out.g, g_rng, "g.fc", gin, c.c1 * c.base * c.base, kLreluGain);
    add_conv(out.g, g_rng, "g.up1", c.c1, c.c1, kLreluGain);
    add_conv(out.g, g_rng, "g.up2", c.c1, c.c2, kLreluGain);
    add_conv(out.g, g_rng, "g.up3", c.c2, c.c3, kLreluGain);
    add_conv(out.g, g_rng, "g.out", c.c3, arch.image.channels, 1.0);

    add_conv(out.d, d_rng, "d.down1", arch.image.channels, c.c3, kLreluGain);
    add_conv(out.d, d_rng, "d.down2", c.c3, c.c2, kLreluGain);
    add_conv(out.d, d_rng, "d.down3", c.c2, c.c1, kLreluGain);
    add_linear(out.d, d_rng, "d.fc", c.c1 * c.base * c.base, arch.feature_dim, kLreluGain);
  }
  const Index score_in = arch.feature_dim + (arch.conditional ? arch.feature_dim : 0);
  if (arch.conditional)
    out.d.add("d.embed", d_rng.normal_matrix(arch.num_classes, arch.feature_dim));
  add_linear(out.d, d_rng, "d.score", score_in, 1, 1.0);
  add_linear(out.d, d_rng, "d.proj", arch.feature_dim, arch.teacher_dim, 1.0);
  return out;
}

Index expected_generator_params(const GanArch& a) {
  const Index embed = a.conditional ? a.num_classes * a.latent_dim : 0;
  const Index gin = g_input_dim(a);
  if (a.kind == ModelKind::dense)
    return embed + linear_count(gin, a.hidden_dim) + linear_count(a.hidden_dim, a.hidden_dim) +
           linear_count(a.hidden_dim, a.image.size());
  const ConvPlan c = conv_plan(a);
  return embed + linear_count(gin, c.c1 * c.base * c.base) + conv_count(c.c1, c.c1) +
         conv_count(c.c1, c.c2) + conv_count(c.c2, c.c3) + conv_count(c.c3, a.image.channels);
}

Index expected_discriminator_params(const GanArch& a) {
  const Index embed = a.conditional ? a.num_classes * a.feature_dim : 0;
  const Index heads = linear_count(a.feature_dim + (a.conditional ? a.feature_dim : 0), 1) +
                      linear_count(a.feature_dim, a.teacher_dim);
  if (a.kind == ModelKind::dense)
    return embed + heads + linear_count(a.image.size(), a.hidden_dim) +
           linear_count(a.hidden_dim, a.feature_dim);
  const ConvPlan c = conv_plan(a);
  return embed + heads + conv_count(a.image.channels, c.c3) + conv_count(c.c3, c.c2) +
         conv_count(c.c2, c.c1) + linear_count(c.c1 * c.base * c.base, a.feature_dim);
}

NoiseBatch sample_noise(RngStream& stream, Index batch, Index latent_dim) {
  return {stream.normal_matrix(batch, latent_dim)};
}

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range");
    m(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return m;
}

ad::Var generate(const GanArch& arch, const BoundParams& g, const ad::Var& z,
                 const std::vector<int>& labels) {
  if (z.cols() != arch.latent_dim)
    throw InvalidArgument("noise has " + std::to_string(z.cols()) + " columns, latent_dim is " +
                          std::to_string(arch.latent_dim));
  check_labels(arch, labels, z.rows());
  using namespace ad;
  Var h = z;
  if (arch.conditional)
    h = concat_cols(z, matmul(Var::constant(one_hot(labels, arch.num_classes)), g["g.embed"]));
  if (arch.kind == ModelKind::dense) {
    h = leaky_relu(linear(g, "g.fc1", h));
    h = leaky_relu(linear(g, "g.fc2", h));
    return tanh(linear(g, "g.out", h));
  }
  const ConvPlan c = conv_plan(arch);
  const int b = static_cast<int>(c.base);
  h = leaky_relu(linear(g, "g.fc", h));
  ImageShape s{static_cast<int>(c.c1), b, b};
  const Index chans[3] = {c.c1, c.c2, c.c3};
  const char* names[3] = {"g.up1", "g.up2", "g.up3"};
  for (int i = 0; i < 3; ++i) {
    h = upsample2x(h, s);
    s = {s.channels, s.height * 2, s.width * 2};
    h = leaky_relu(conv(g, names[i], h, s, static_cast<int>(chans[i]), 1));
    s.channels = static_cast<int>(chans[i]);
  }
  return tanh(conv(g, "g.out", h, s, arch.image.channels, 1));
}

ImageBatch generate(const GanArch& arch, const ParamSet& g, const NoiseBatch& z,
                    const std::vector<int>& labels) {
  BoundParams bound(g, false);
  return {generate(arch, bound, ad::Var::constant(z.data), labels).value(), arch.image, labels};
}

DiscriminatorVars discriminate(const GanArch& arch, const BoundParams& d, const ad::Var& images,
                               const std::vector<int>& labels) {
  if (images.cols() != arch.image.size())
    throw InvalidArgument("discriminator expects " + std::to_string(arch.image.size()) +
                          " pixels per image, got " + shape_string(images.value()));
  check_labels(arch, labels, images.rows());
  using namespace ad;
  Var h;
  if (arch.kind == ModelKind::dense) {
    h = leaky_relu(linear(d, "d.fc1", images));
    h = leaky_relu(linear(d, "d.fc2", h));
  } else {
    const ConvPlan c = conv_plan(arch);
    ImageShape s = arch.image;
    const Index chans[3] = {c.c3, c.c2, c.c1};
    const char* names[3] = {"d.down1", "d.down2", "d.down3"};
    h = images;
    for (int i = 0; i < 3; ++i) {
      h = leaky_relu(conv(d, names[i], h, s, static_cast<int>(chans[i]), 2));
      s = {static_cast<int>(chans[i]), s.height / 2, s.width / 2};
    }
    h = leaky_relu(linear(d, "d.fc", h));
  }
  DiscriminatorVars out;
  out.features = h;
  Var head_in = h;
  if (arch.conditional)
    head_in = concat_cols(h, matmul(Var::constant(one_hot(labels, arch.num_classes)), d["d.embed"]));
  out.scores = linear(d, "d.score", head_in);
  out.projected = row_l2_normalize(linear(d, "d.proj", h));
  return out;
}

DiscriminatorOutput discriminate(const GanArch& arch, const ParamSet& d, const ImageBatch& images) {
  BoundParams bound(d, false);
  DiscriminatorVars v = discriminate(arch, bound, ad::Var::constant(images.data), images.labels);
  return {v.scores.value(), FeatureBatch(v.features.value()), FeatureBatch(v.projected.value())};
}

}  // namespace kdgan
