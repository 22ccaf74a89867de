// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "kdgan/adversarial.hpp"
#include "kdgan/errors.hpp"
#include "kdgan/numerics.hpp"
#include "test_util.hpp"

using namespace kdgan;
using namespace kdgan::adversarial;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

const double kLn2 = std::numbers::ln2;

}  // namespace

TEST_CASE("adversarial loss examples") {
  CHECK(d_adv_loss(col({0}), col({0}), ScoreKind::logits, DLossKind::logistic) ==
        doctest::Approx(2 * kLn2));
  CHECK(d_adv_loss(col({0.5}), col({0.5}), ScoreKind::probabilities, DLossKind::logistic) ==
        doctest::Approx(2 * kLn2));
  CHECK(d_adv_loss(col({1}), col({-1}), ScoreKind::logits, DLossKind::hinge) == 0.0);
  CHECK(d_adv_loss(col({0}), col({0}), ScoreKind::logits, DLossKind::hinge) == doctest::Approx(2.0));
  CHECK(g_adv_loss(col({0}), ScoreKind::logits, GLossKind::logistic_saturating) ==
        doctest::Approx(-kLn2));
  CHECK(g_adv_loss(col({0}), ScoreKind::logits, GLossKind::logistic_nonsaturating) ==
        doctest::Approx(kLn2));
  CHECK(g_adv_loss(col({0}), ScoreKind::logits, GLossKind::hinge) == 0.0);
  CHECK(g_adv_loss(col({0.5}), ScoreKind::probabilities, GLossKind::logistic_saturating) ==
        doctest::Approx(-kLn2));
}

TEST_CASE("logit and probability forms agree") {
  RngStream rng(1, "adv");
  Matrix lr = rng.normal_matrix(6, 1), lf = rng.normal_matrix(6, 1);
  Matrix pr = (1.0 + (-lr.array()).exp()).inverse().matrix();
  Matrix pf = (1.0 + (-lf.array()).exp()).inverse().matrix();
  CHECK(d_adv_loss(lr, lf, ScoreKind::logits, DLossKind::logistic) ==
        doctest::Approx(d_adv_loss(pr, pf, ScoreKind::probabilities, DLossKind::logistic)));
  for (GLossKind g : {GLossKind::logistic_saturating, GLossKind::logistic_nonsaturating})
    CHECK(g_adv_loss(lf, ScoreKind::logits, g) ==
          doctest::Approx(g_adv_loss(pf, ScoreKind::probabilities, g)));
}

TEST_CASE("saturated probabilities stay finite and large logits are stable") {
  double d = d_adv_loss(col({0.0}), col({1.0}), ScoreKind::probabilities, DLossKind::logistic);
  CHECK(std::isfinite(d));
  CHECK(d == doctest::Approx(-2 * std::log(kProbEps)));
  double big = d_adv_loss(col({-800}), col({800}), ScoreKind::logits, DLossKind::logistic);
  CHECK(big == doctest::Approx(1600.0));
}

TEST_CASE("invalid scores are rejected") {
  CHECK_THROWS_AS(d_adv_loss(col({1.2}), col({0.5}), ScoreKind::probabilities, DLossKind::logistic),
                  InvalidArgument);
  CHECK_THROWS_AS(d_adv_loss(col({0.5}), col({0.5}), ScoreKind::probabilities, DLossKind::hinge),
                  InvalidArgument);
  CHECK_THROWS_AS(g_adv_loss(col({0.5}), ScoreKind::probabilities, GLossKind::hinge),
                  InvalidArgument);
  CHECK_THROWS_AS(d_adv_loss(Matrix::Zero(2, 2), col({0, 0}), ScoreKind::logits, DLossKind::logistic),
                  InvalidArgument);
  CHECK_THROWS_AS(
      d_adv_loss(col({std::numeric_limits<double>::quiet_NaN()}), col({0}), ScoreKind::logits,
                 DLossKind::logistic),
      InvalidArgument);
  CHECK_THROWS_AS(parse_d_kind("wgan"), InvalidArgument);
  CHECK_THROWS_AS(parse_g_kind("wgan"), InvalidArgument);
  CHECK(parse_g_kind(to_string(GLossKind::logistic_nonsaturating)) ==
        GLossKind::logistic_nonsaturating);
  CHECK(parse_d_kind(to_string(DLossKind::hinge)) == DLossKind::hinge);
}

TEST_CASE("the optimal discriminator on identical distributions outputs one half") {
  // Real and fake share the same score; the loss is stationary at D = 0.5.
  for (ScoreKind kind : {ScoreKind::logits, ScoreKind::probabilities}) {
    double at = kind == ScoreKind::logits ? 0.0 : 0.5;
    ad::Var s = ad::Var::leaf(col({at}));
    ad::backward(d_adv_loss({s, s, kind}, DLossKind::logistic));
    CHECK(std::abs(s.grad()(0, 0)) < 1e-12);
    // And it is a minimum.
    const double h = 1e-3;
    for (double off : {-h, h})
      CHECK(d_adv_loss(col({at + off}), col({at + off}), kind, DLossKind::logistic) >
            d_adv_loss(col({at}), col({at}), kind, DLossKind::logistic));
  }
}

TEST_CASE("composition examples") {
  agkd::AgkdOutput a;
  a.l_kd = 0.3;
  a.l_agg_raw = 0.2;
  a.gate_open = true;
  a.l_total = 0.5;
  cgkd::CgkdValues c{0.4, 0.25, 0.65};
  ObjectiveBundle b = compose_objective(1.0, 2.0, a, c, LossWeights{});
  CHECK(b.d_loss == doctest::Approx(1.75));
  CHECK(b.g_loss == doctest::Approx(2.65));
  CHECK(b.components.at("d/agkd") == doctest::Approx(0.5));
  CHECK(b.components.at("g/cgkd_pd") == doctest::Approx(0.4));

  double d_sum = 0, g_sum = 0;
  for (const auto& [k, v] : b.components) (k[0] == 'd' ? d_sum : g_sum) += v;
  CHECK(d_sum == doctest::Approx(b.d_loss));
  CHECK(g_sum == doctest::Approx(b.g_loss));

  LossWeights zero{0.0, 0.0, 0.0, true};
  ObjectiveBundle z = compose_objective(1.0, 2.0, a, c, zero);
  CHECK(z.d_loss == 1.0);
  CHECK(z.g_loss == 2.0);
  CHECK(z.components.size() == 2);
  CHECK(z.components.count("d/adv") == 1);
  CHECK(z.components.count("g/adv") == 1);

  LossWeights no_g{1.0, 1.0, 1.0, false};
  CHECK(compose_objective(1.0, 2.0, a, c, no_g).g_loss == doctest::Approx(2.4));
  CHECK(compose_objective(1.0, 2.0, std::nullopt, std::nullopt, LossWeights{}).d_loss == 1.0);
}

TEST_CASE("objectives are linear in each weight") {
  agkd::AgkdOutput a;
  a.l_total = 0.37;
  cgkd::CgkdValues c{1.3, 0.21, 1.51};
  const double base_d = compose_objective(0.9, 0.4, a, c, {0, 0, 0, true}).d_loss;
  for (double w : {0.5, 1.0, 2.0, 7.5}) {
    CHECK(compose_objective(0.9, 0.4, a, c, {w, 0, 0, true}).d_loss - base_d ==
          doctest::Approx(w * 0.37));
    CHECK(compose_objective(0.9, 0.4, a, c, {0, w, 0, true}).d_loss - base_d ==
          doctest::Approx(w * 0.21));
    CHECK(compose_objective(0.9, 0.4, a, c, {0, 0, w, true}).g_loss - 0.4 ==
          doctest::Approx(w * 1.3));
  }
}

TEST_CASE("non-finite components are named") {
  agkd::AgkdOutput a;
  a.l_total = std::numeric_limits<double>::infinity();
  try {
    compose_objective(1.0, 1.0, a, std::nullopt, LossWeights{});
    FAIL("expected NumericFailure");
  } catch (const NumericFailure& e) {
    CHECK(std::string(e.what()).find("d/agkd") != std::string::npos);
  }
}

TEST_CASE("adversarial gradients match finite differences") {
  RngStream rng(2, "adv-grad");
  auto away_from_hinge = [](const Matrix& m) {
    return ((m.array() - 1.0).abs().minCoeff() > 1e-2) && ((m.array() + 1.0).abs().minCoeff() > 1e-2);
  };
  Matrix r, f;
  do {
    r = rng.normal_matrix(5, 1) * 1.5;
    f = rng.normal_matrix(5, 1) * 1.5;
  } while (!away_from_hinge(r) || !away_from_hinge(f));
  Matrix pr = (1.0 + (-r.array()).exp()).inverse().matrix();
  Matrix pf = (1.0 + (-f.array()).exp()).inverse().matrix();

  for (DLossKind dk : {DLossKind::logistic, DLossKind::hinge}) {
    auto rep = check_gradients(
        [&](const std::vector<ad::Var>& v) { return d_adv_loss({v[0], v[1], ScoreKind::logits}, dk); },
        {{"real", r}, {"fake", f}});
    INFO(to_string(dk), " ", rep.to_string());
    CHECK(rep.max_rel_error < 1e-4);
  }
  auto prob = check_gradients(
      [&](const std::vector<ad::Var>& v) {
        return d_adv_loss({v[0], v[1], ScoreKind::probabilities}, DLossKind::logistic);
      },
      {{"real", pr}, {"fake", pf}});
  CHECK(prob.max_rel_error < 1e-4);
  for (GLossKind gk : {GLossKind::logistic_saturating, GLossKind::logistic_nonsaturating, GLossKind::hinge}) {
    auto rep = check_gradients(
        [&](const std::vector<ad::Var>& v) { return g_adv_loss(v[0], ScoreKind::logits, gk); },
        {{"fake", f}});
    INFO(to_string(gk), " ", rep.to_string());
    CHECK(rep.max_rel_error < 1e-4);
  }
}
