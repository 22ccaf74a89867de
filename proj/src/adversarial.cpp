// SPDX-License-Identifier: Apache-2.0
#include "kdgan/adversarial.hpp"

#include <cmath>

#include "kdgan/errors.hpp"

namespace kdgan::adversarial {
namespace {

void check_scores(const ad::Var& s, ScoreKind kind, const char* what) {
  if (s.cols() != 1 || s.rows() < 1)
    throw InvalidArgument(std::string(what) + " scores must be a [B x 1] column, got " +
                          shape_string(s.value()));
  if (!s.value().allFinite()) throw InvalidArgument(std::string(what) + " scores are not finite");
  if (kind == ScoreKind::probabilities &&
      (s.value().minCoeff() < 0.0 || s.value().maxCoeff() > 1.0))
    throw InvalidArgument(std::string(what) +
                          " probabilities fall outside [0, 1]");
}

// E log p and E log(1 - p) for either score representation.
ad::Var mean_log_d(const ad::Var& s, ScoreKind kind) {
  if (kind == ScoreKind::logits) return -1.0 * ad::mean(ad::softplus(-1.0 * s));
  return ad::mean(ad::log_clamped(s, kProbEps));
}

ad::Var mean_log_one_minus_d(const ad::Var& s, ScoreKind kind) {
  if (kind == ScoreKind::logits) return -1.0 * ad::mean(ad::softplus(s));
  return ad::mean(ad::log_clamped(ad::add_scalar(-1.0 * s, 1.0), kProbEps));
}

void require_logits(ScoreKind kind) {
  if (kind != ScoreKind::logits) throw InvalidArgument("hinge loss is defined on logits");
}

void check_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw NumericFailure("objective component '" + name + "' is not finite");
}

}  // namespace

DLossKind parse_d_kind(const std::string& s) {
  if (s == "logistic") return DLossKind::logistic;
  if (s == "hinge") return DLossKind::hinge;
  throw InvalidArgument("unknown adv.kind '" + s + "' (expected logistic or hinge)");
}

GLossKind parse_g_kind(const std::string& s) {
  if (s == "saturating" || s == "logistic_saturating") return GLossKind::logistic_saturating;
  if (s == "nonsaturating" || s == "logistic_nonsaturating")
    return GLossKind::logistic_nonsaturating;
  if (s == "hinge") return GLossKind::hinge;
  throw InvalidArgument("unknown adv.g_variant '" + s +
                        "' (expected saturating, nonsaturating or hinge)");
}

std::string to_string(DLossKind k) { return k == DLossKind::logistic ? "logistic" : "hinge"; }

std::string to_string(GLossKind k) {
  switch (k) {
    case GLossKind::logistic_saturating: return "saturating";
    case GLossKind::logistic_nonsaturating: return "nonsaturating";
    case GLossKind::hinge: return "hinge";
  }
  return "?";
}

ad::Var d_adv_loss(const DiscriminatorScores& scores, DLossKind kind) {
  check_scores(scores.real_scores, scores.kind, "real");
  check_scores(scores.fake_scores, scores.kind, "fake");
  if (kind == DLossKind::hinge) {
    require_logits(scores.kind);
    return ad::mean(ad::relu(ad::add_scalar(-1.0 * scores.real_scores, 1.0))) +
           ad::mean(ad::relu(ad::add_scalar(scores.fake_scores, 1.0)));
  }
  return -1.0 * (mean_log_d(scores.real_scores, scores.kind) +
                 mean_log_one_minus_d(scores.fake_scores, scores.kind));
}

ad::Var g_adv_loss(const ad::Var& fake_scores, ScoreKind score_kind, GLossKind kind) {
  check_scores(fake_scores, score_kind, "fake");
  switch (kind) {
    case GLossKind::logistic_saturating: return mean_log_one_minus_d(fake_scores, score_kind);
    case GLossKind::logistic_nonsaturating: return -1.0 * mean_log_d(fake_scores, score_kind);
    case GLossKind::hinge:
      require_logits(score_kind);
      return -1.0 * ad::mean(fake_scores);
  }
  throw InvalidArgument("unknown generator loss kind");
}

double d_adv_loss(const Matrix& real, const Matrix& fake, ScoreKind score_kind, DLossKind kind) {
  return d_adv_loss({ad::Var::constant(real), ad::Var::constant(fake), score_kind}, kind).item();
}

double g_adv_loss(const Matrix& fake, ScoreKind score_kind, GLossKind kind) {
  return g_adv_loss(ad::Var::constant(fake), score_kind, kind).item();
}

ad::Var discriminator_objective(const ad::Var& adv_d, const ad::Var* agkd_total,
                                const ad::Var* cgkd_kd, const LossWeights& w,
                                std::map<std::string, double>* components) {
  auto note = [components](const std::string& k, double v) {
    check_finite(v, k);
    if (components) (*components)[k] = v;
  };
  note("d/adv", adv_d.item());
  ad::Var d = adv_d;
  if (agkd_total && w.agkd != 0.0) {
    ad::Var term = w.agkd * *agkd_total;
    note("d/agkd", term.item());
    d = d + term;
  }
  if (cgkd_kd && w.cgkd_kd != 0.0) {
    ad::Var term = w.cgkd_kd * *cgkd_kd;
    note("d/cgkd_kd", term.item());
    d = d + term;
  }
  return d;
}

ad::Var generator_objective(const ad::Var& adv_g, const ad::Var* cgkd_pd, const ad::Var* cgkd_kd,
                            const LossWeights& w, std::map<std::string, double>* components) {
  auto note = [components](const std::string& k, double v) {
    check_finite(v, k);
    if (components) (*components)[k] = v;
  };
  note("g/adv", adv_g.item());
  ad::Var g = adv_g;
  if (cgkd_pd && w.cgkd_pd != 0.0) {
    ad::Var term = w.cgkd_pd * *cgkd_pd;
    note("g/cgkd_pd", term.item());
    g = g + term;
  }
  if (cgkd_kd && w.cgkd_kd != 0.0 && w.cgkd_kd_to_generator) {
    ad::Var term = w.cgkd_kd * *cgkd_kd;
    note("g/cgkd_kd", term.item());
    g = g + term;
  }
  return g;
}

ObjectiveBundle compose_objective(double adv_d, double adv_g,
                                  const std::optional<agkd::AgkdOutput>& agkd,
                                  const std::optional<cgkd::CgkdValues>& cgkd,
                                  const LossWeights& w) {
  ObjectiveBundle out;
  std::optional<ad::Var> agkd_total, pd, kd;
  if (agkd) agkd_total = ad::Var::scalar(agkd->l_total);
  if (cgkd) {
    pd = ad::Var::scalar(cgkd->l_pd);
    kd = ad::Var::scalar(cgkd->l_kd);
  }
  out.d_loss = discriminator_objective(ad::Var::scalar(adv_d), agkd_total ? &*agkd_total : nullptr,
                                       kd ? &*kd : nullptr, w, &out.components)
                   .item();
  out.g_loss = generator_objective(ad::Var::scalar(adv_g), pd ? &*pd : nullptr,
                                   kd ? &*kd : nullptr, w, &out.components)
                   .item();
  return out;
}

}  // namespace kdgan::adversarial
