// SPDX-License-Identifier: Apache-2.0
#include "kdgan/gradcheck_suite.hpp"

#include <algorithm>

#include "kdgan/adversarial.hpp"
#include "kdgan/agkd.hpp"
#include "kdgan/cgkd.hpp"
#include "kdgan/errors.hpp"
#include "kdgan/gan_toy.hpp"
#include "kdgan/teacher.hpp"

namespace kdgan {
namespace {

constexpr double kKinkMargin = 1e-3;
constexpr int kMaxResample = 1000;

double min_gap(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().minCoeff(); }

TextFeatureSet random_texts(RngStream& rng, Index k, Index m) {
  std::vector<std::string> labels;
  for (Index i = 0; i < k; ++i) labels.push_back("t" + std::to_string(i));
  return TextFeatureSet(rng.normal_matrix(k, m), labels);
}

GradCheckReport check_agkd(std::uint64_t seed) {
  RngStream rng(seed, "gradcheck.agkd");
  GradCheckReport report;
  for (bool open : {false, true}) {
    Matrix tr, tf, sr, sf;
    int tries = 0;
    do {
      if (++tries > kMaxResample) throw NumericFailure("agkd gradcheck: could not avoid kinks");
      tr = rng.normal_matrix(4, 5);
      tf = rng.normal_matrix(4, 5);
      sr = rng.normal_matrix(4, 5);
      sf = rng.normal_matrix(4, 5);
    } while (std::min({min_gap(tr, sr), min_gap(tf, sf), min_gap(tr, sf), min_gap(tf, sr)}) <
             kKinkMargin);
    RngStream gate(seed, "gradcheck.gate");
    auto r = check_gradients(
        [&](const std::vector<ad::Var>& v) {
          return agkd::total({v[0], v[1], v[2], v[3]}, {open ? 1.0 : 0.0, &gate}).l_total;
        },
        {{"teacher_real", tr}, {"teacher_fake", tf}, {"student_real", sr}, {"student_fake", sf}},
        1e-4);  // piecewise linear and every kink is >= kKinkMargin away
    report.merge(r, open ? "agkd[gate open]/" : "agkd[gate closed]/");
  }
  return report;
}

GradCheckReport check_cgkd(std::uint64_t seed) {
  RngStream rng(seed, "gradcheck.cgkd");
  GradCheckReport report;
  for (bool ordered : {true, false}) {
    Matrix tf, sf;
    TextFeatureSet texts;
    int tries = 0;
    while (true) {
      if (++tries > kMaxResample) throw NumericFailure("cgkd gradcheck: could not avoid kinks");
      tf = rng.normal_matrix(4, 5);
      sf = rng.normal_matrix(4, 5);
      texts = random_texts(rng, 3, 5);
      auto ct = cgkd::build_correlation(FeatureBatch(tf), texts, cgkd::Source::teacher);
      auto cs = cgkd::build_correlation(FeatureBatch(sf), texts, cgkd::Source::student);
      if (min_gap(ct.data.value(), cs.data.value()) >= kKinkMargin) break;
    }
    auto r = check_gradients(
        [&](const std::vector<ad::Var>& v) { return cgkd::total(v[0], v[1], texts, ordered).l_total; },
        {{"teacher_fake", tf}, {"student_fake", sf}});
    report.merge(r, ordered ? "cgkd[ordered]/" : "cgkd[unordered]/");
  }
  return report;
}

GradCheckReport check_adv(std::uint64_t seed) {
  using namespace adversarial;
  RngStream rng(seed, "gradcheck.adv");
  auto clear = [](const Matrix& m) {
    return ((m.array() - 1.0).abs().minCoeff() >= kKinkMargin) &&
           ((m.array() + 1.0).abs().minCoeff() >= kKinkMargin);
  };
  Matrix r, f;
  int tries = 0;
  do {
    if (++tries > kMaxResample) throw NumericFailure("adv gradcheck: could not avoid kinks");
    r = rng.normal_matrix(6, 1) * 1.5;
    f = rng.normal_matrix(6, 1) * 1.5;
  } while (!clear(r) || !clear(f));
  const Matrix pr = (1.0 + (-r.array()).exp()).inverse().matrix();
  const Matrix pf = (1.0 + (-f.array()).exp()).inverse().matrix();

  GradCheckReport report;
  for (DLossKind k : {DLossKind::logistic, DLossKind::hinge})
    report.merge(check_gradients(
                     [&](const std::vector<ad::Var>& v) {
                       return d_adv_loss({v[0], v[1], ScoreKind::logits}, k);
                     },
                     {{"real", r}, {"fake", f}}),
                 "adv/d_" + to_string(k) + "/");
  report.merge(check_gradients(
                   [&](const std::vector<ad::Var>& v) {
                     return d_adv_loss({v[0], v[1], ScoreKind::probabilities}, DLossKind::logistic);
                   },
                   {{"real", pr}, {"fake", pf}}),
               "adv/d_logistic_prob/");
  for (GLossKind k : {GLossKind::logistic_saturating, GLossKind::logistic_nonsaturating, GLossKind::hinge})
    report.merge(check_gradients(
                     [&](const std::vector<ad::Var>& v) {
                       return g_adv_loss(v[0], ScoreKind::logits, k);
                     },
                     {{"fake", f}}),
                 "adv/g_" + to_string(k) + "/");
  for (GLossKind k : {GLossKind::logistic_saturating, GLossKind::logistic_nonsaturating})
    report.merge(check_gradients(
                     [&](const std::vector<ad::Var>& v) {
                       return g_adv_loss(v[0], ScoreKind::probabilities, k);
                     },
                     {{"fake", pf}}),
                 "adv/g_" + to_string(k) + "_prob/");
  return report;
}

std::vector<NamedInput> as_inputs(const ParamSet& p) {
  std::vector<NamedInput> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({p.name(i), p.value(i)});
  return out;
}

// Full discriminator and generator objectives through the toy models and teacher.
GradCheckReport check_models(std::uint64_t seed) {
  GanArch arch;
  arch.image = {1, 4, 4};
  arch.latent_dim = 3;
  arch.hidden_dim = 5;
  arch.feature_dim = 4;
  arch.teacher_dim = 3;
  GanParams params = init_params(arch, seed);
  auto teacher = build_mock_teacher({seed + 1, 3, 6, arch.image});
  RngStream rng(seed, "gradcheck.models");
  const TextFeatureSet texts = teacher->encode_texts({"a photo of a one", "a photo of a two", "a photo of a three"});
  const Matrix z = rng.normal_matrix(3, arch.latent_dim);
  const Matrix real = rng.normal_matrix(3, arch.image.size()).array().tanh().matrix();
  const Matrix fake = generate(arch, params.g, NoiseBatch{z}).data;
  const Matrix t_real = teacher->encode_images(ad::Var::constant(real)).value();
  const Matrix t_fake = teacher->encode_images(ad::Var::constant(fake)).value();
  adversarial::LossWeights w;

  GradCheckReport report;
  auto d_objective = [&](const std::vector<ad::Var>& v) {
    BoundParams d(params.d, v);
    auto dr = discriminate(arch, d, ad::Var::constant(real), {});
    auto df = discriminate(arch, d, ad::Var::constant(fake), {});
    ad::Var adv = adversarial::d_adv_loss({dr.scores, df.scores, adversarial::ScoreKind::logits},
                                          adversarial::DLossKind::logistic);
    RngStream gate(seed, "gradcheck.gate");
    ad::Var ag = agkd::total({ad::Var::constant(t_real), ad::Var::constant(t_fake), dr.projected, df.projected},
                             {1.0, &gate})
                     .l_total;
    ad::Var kd = cgkd::correlation_kd_loss(
        cgkd::build_correlation(ad::Var::constant(t_fake), texts, cgkd::Source::teacher),
        cgkd::build_correlation(df.projected, texts, cgkd::Source::student));
    return adversarial::discriminator_objective(adv, &ag, &kd, w);
  };
  report.merge(check_gradients(d_objective, as_inputs(params.d)), "models/discriminator/");

  // The student correlations are detached for the generator, so they stay at the base point.
  const auto cs_fixed = cgkd::build_correlation(
      ad::Var::constant(discriminate(arch, params.d, ImageBatch{fake, arch.image, {}}).projected.data()), texts,
      cgkd::Source::student);
  auto g_objective = [&](const std::vector<ad::Var>& v) {
    BoundParams g(params.g, v);
    BoundParams d(params.d, false);
    ad::Var img = generate(arch, g, ad::Var::constant(z), {});
    auto df = discriminate(arch, d, img, {});
    ad::Var adv = adversarial::g_adv_loss(df.scores, adversarial::ScoreKind::logits,
                                          adversarial::GLossKind::logistic_nonsaturating);
    auto ct = cgkd::build_correlation(teacher->encode_images(img), texts, cgkd::Source::teacher);
    ad::Var pd = cgkd::pairwise_diversity_loss(ct);
    ad::Var kd = cgkd::correlation_kd_loss(ct, cs_fixed);
    return adversarial::generator_objective(adv, &pd, &kd, w);
  };
  report.merge(check_gradients(g_objective, as_inputs(params.g)), "models/generator/");

  auto teacher_path = [&](const std::vector<ad::Var>& v) {
    return ad::sum(ad::mul_const(teacher->encode_images(v[0]), t_real));
  };
  report.merge(check_gradients(teacher_path, {{"images", fake}}), "models/teacher/");
  return report;
}

}  // namespace

GradCheckReport run_gradcheck_suite(const std::string& module, std::uint64_t seed) {
  GradCheckReport report;
  const bool all = module == "all";
  if (!all && module != "agkd" && module != "cgkd" && module != "adv" && module != "models")
    throw InvalidArgument("unknown gradcheck module '" + module +
                          "' (expected all, agkd, cgkd, adv or models)");
  if (all || module == "agkd") report.merge(check_agkd(seed));
  if (all || module == "cgkd") report.merge(check_cgkd(seed));
  if (all || module == "adv") report.merge(check_adv(seed));
  if (all || module == "models") report.merge(check_models(seed));
  return report;
}

}  // namespace kdgan
