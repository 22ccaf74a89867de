// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "kdgan/errors.hpp"
#include "kdgan/gan_toy.hpp"
#include "kdgan/numerics.hpp"
#include "test_util.hpp"

using namespace kdgan;

namespace {

GanArch small_dense(bool conditional = false) {
  GanArch a;
  a.image = {1, 4, 4};
  a.latent_dim = 4;
  a.hidden_dim = 6;
  a.feature_dim = 5;
  a.teacher_dim = 3;
  a.conditional = conditional;
  a.num_classes = conditional ? 3 : 0;
  return a;
}

GanArch small_conv() {
  GanArch a;
  a.kind = ModelKind::conv;
  a.image = {1, 8, 8};
  a.latent_dim = 4;
  a.hidden_dim = 8;
  a.feature_dim = 5;
  a.teacher_dim = 3;
  return a;
}

// Central differences over every scalar of one parameter, against the tape.
double param_grad_error(const ParamSet& set, const std::string& name,
                        const std::function<double(const ParamSet&)>& value_fn,
                        const std::function<ad::Var(const BoundParams&)>& var_fn) {
  BoundParams bound(set, true);
  ad::backward(var_fn(bound));
  Matrix analytic = bound[name].grad();

  const Matrix& base = set.at(name);
  Vector theta = Eigen::Map<const Vector>(base.data(), base.size());
  Vector numeric = finite_diff_gradient(
      [&](const Vector& t) {
        ParamSet copy = set;
        copy.at(name) = Eigen::Map<const Matrix>(t.data(), base.rows(), base.cols());
        return value_fn(copy);
      },
      theta);
  double worst = 0.0;
  for (Index i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, relative_error(analytic.data()[i], numeric[i]));
  return worst;
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed") {
  GanArch a = small_dense();
  GanParams p1 = init_params(a, 11), p2 = init_params(a, 11), p3 = init_params(a, 12);
  CHECK(p1.g.hash() == p2.g.hash());
  CHECK(p1.d.hash() == p2.d.hash());
  CHECK(p1.g.hash() != p3.g.hash());
  RngStream s1(5, "noise"), s2(5, "noise");
  auto z1 = sample_noise(s1, 3, a.latent_dim), z2 = sample_noise(s2, 3, a.latent_dim);
  CHECK(generate(a, p1.g, z1).data == generate(a, p2.g, z2).data);
}

TEST_CASE("parameter counts match the documented architecture") {
  GanArch a = small_dense();
  // G: 4*6+6, 6*6+6, 6*16+16.  D: 16*6+6, 6*5+5, score 5+1, proj 5*3+3.
  const Index g = (4 * 6 + 6) + (6 * 6 + 6) + (6 * 16 + 16);
  const Index d = (16 * 6 + 6) + (6 * 5 + 5) + (5 + 1) + (5 * 3 + 3);
  GanParams p = init_params(a, 1);
  CHECK(p.g.count() == g);
  CHECK(p.d.count() == d);
  CHECK(expected_generator_params(a) == g);
  CHECK(expected_discriminator_params(a) == d);

  GanArch c = small_dense(true);
  GanParams pc = init_params(c, 1);
  // Embeddings widen the first G layer and the score head.
  CHECK(pc.g.count() == g + 4 * 6 + 3 * 4);
  CHECK(pc.d.count() == d + 5 + 3 * 5);

  GanArch v = small_conv();
  GanParams pv = init_params(v, 1);
  // s = 1, channels 8, 8, 8.
  const Index gv = (4 * 8 + 8) + 3 * (8 * 8 * 9 + 8) + (8 * 9 + 1);
  const Index dv = (1 * 9 * 8 + 8) + 2 * (8 * 8 * 9 + 8) + (8 * 5 + 5) + (5 + 1) + (5 * 3 + 3);
  CHECK(pv.g.count() == gv);
  CHECK(pv.d.count() == dv);
  CHECK(expected_generator_params(v) == gv);
  CHECK(expected_discriminator_params(v) == dv);
}

TEST_CASE("generated pixels lie in [-1, 1]") {
  for (GanArch a : {small_dense(), small_conv()}) {
    GanParams p = init_params(a, 2);
    RngStream s(3, "noise");
    NoiseBatch z = sample_noise(s, 1000, a.latent_dim);
    z.data *= 5.0;
    ImageBatch img = generate(a, p.g, z);
    CHECK(img.data.rows() == 1000);
    CHECK(img.data.cols() == a.image.size());
    CHECK(img.data.maxCoeff() <= 1.0);
    CHECK(img.data.minCoeff() >= -1.0);
  }
}

TEST_CASE("projected features are unit length") {
  for (GanArch a : {small_dense(), small_conv()}) {
    GanParams p = init_params(a, 4);
    RngStream s(4, "noise");
    ImageBatch img = generate(a, p.g, sample_noise(s, 7, a.latent_dim));
    DiscriminatorOutput out = discriminate(a, p.d, img);
    CHECK(out.scores.rows() == 7);
    CHECK(out.scores.cols() == 1);
    CHECK(out.features.dim() == a.feature_dim);
    CHECK(out.projected.dim() == a.teacher_dim);
    for (Index i = 0; i < 7; ++i)
      CHECK(std::abs(out.projected.data().row(i).norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("changing only the projection leaves the scores unchanged") {
  GanArch a = small_dense();
  GanParams p = init_params(a, 5);
  RngStream s(5, "noise");
  ImageBatch img = generate(a, p.g, sample_noise(s, 4, a.latent_dim));
  DiscriminatorOutput before = discriminate(a, p.d, img);
  ParamSet d2 = p.d;
  d2.at("d.proj.w") *= -3.0;
  d2.at("d.proj.b").setConstant(0.7);
  DiscriminatorOutput after = discriminate(a, d2, img);
  CHECK(before.scores == after.scores);
  CHECK(before.features.data() == after.features.data());
  CHECK(before.projected.data() != after.projected.data());
}

TEST_CASE("generator gradients match finite differences") {
  for (GanArch a : {small_dense(), small_dense(true), small_conv()}) {
    GanParams p = init_params(a, 6);
    RngStream s(6, "noise");
    NoiseBatch z = sample_noise(s, 3, a.latent_dim);
    std::vector<int> labels = a.conditional ? std::vector<int>{0, 2, 1} : std::vector<int>{};
    auto value_fn = [&](const ParamSet& g) {
      ImageBatch img = generate(a, g, z, labels);
      return img.data.mean();
    };
    auto var_fn = [&](const BoundParams& g) {
      return ad::mean(generate(a, g, ad::Var::constant(z.data), labels));
    };
    for (std::size_t i = 0; i < p.g.size(); ++i) {
      INFO(p.g.name(i));
      CHECK(param_grad_error(p.g, p.g.name(i), value_fn, var_fn) < 1e-4);
    }
  }
}

TEST_CASE("discriminator gradients match finite differences") {
  for (GanArch a : {small_dense(), small_dense(true), small_conv()}) {
    GanParams p = init_params(a, 7);
    RngStream s(7, "noise");
    std::vector<int> labels = a.conditional ? std::vector<int>{1, 0, 2} : std::vector<int>{};
    ImageBatch img = generate(a, p.g, sample_noise(s, 3, a.latent_dim), labels);
    Matrix w = s.normal_matrix(3, a.teacher_dim);
    auto var_fn = [&](const BoundParams& d) {
      DiscriminatorVars v = discriminate(a, d, ad::Var::constant(img.data), labels);
      return ad::mean(v.scores) + ad::sum(ad::mul_const(v.projected, w));
    };
    auto value_fn = [&](const ParamSet& d) {
      BoundParams b(d, false);
      return var_fn(b).item();
    };
    for (std::size_t i = 0; i < p.d.size(); ++i) {
      INFO(p.d.name(i));
      CHECK(param_grad_error(p.d, p.d.name(i), value_fn, var_fn) < 1e-4);
    }
  }
}

TEST_CASE("label validation") {
  GanArch a = small_dense(true);
  GanParams p = init_params(a, 8);
  RngStream s(8, "noise");
  NoiseBatch z = sample_noise(s, 2, a.latent_dim);
  CHECK_THROWS_AS(generate(a, p.g, z), InvalidArgument);
  CHECK_THROWS_AS(generate(a, p.g, z, {0}), InvalidArgument);
  CHECK_THROWS_AS(generate(a, p.g, z, {0, 3}), InvalidArgument);
  CHECK_NOTHROW(generate(a, p.g, z, {0, 2}));

  GanArch u = small_dense(false);
  GanParams pu = init_params(u, 8);
  CHECK_THROWS_AS(generate(u, pu.g, z, {0, 1}), InvalidArgument);

  GanArch bad = small_conv();
  bad.image = {1, 6, 6};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(one_hot({0, 4}, 3), InvalidArgument);
  CHECK(one_hot({2, 0}, 3) == (Matrix(2, 3) << 0, 0, 1, 1, 0, 0).finished());
}

TEST_CASE("conditional generation depends on the label") {
  GanArch a = small_dense(true);
  GanParams p = init_params(a, 9);
  RngStream s(9, "noise");
  NoiseBatch z = sample_noise(s, 1, a.latent_dim);
  CHECK(generate(a, p.g, z, {0}).data != generate(a, p.g, z, {1}).data);
}
