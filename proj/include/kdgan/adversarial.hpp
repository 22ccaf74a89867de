// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>

#include "kdgan/agkd.hpp"
#include "kdgan/autodiff.hpp"
#include "kdgan/cgkd.hpp"

namespace kdgan::adversarial {

inline constexpr double kProbEps = 1e-7;

enum class ScoreKind { logits, probabilities };
enum class DLossKind { logistic, hinge };
enum class GLossKind { logistic_saturating, logistic_nonsaturating, hinge };

DLossKind parse_d_kind(const std::string& s);
GLossKind parse_g_kind(const std::string& s);
std::string to_string(DLossKind k);
std::string to_string(GLossKind k);

/// Discriminator outputs D(x) and D(G(z)) as [B x 1] columns.
struct DiscriminatorScores {
  ad::Var real_scores;
  ad::Var fake_scores;
  ScoreKind kind = ScoreKind::logits;
};

/// Discriminator loss expressed for minimization.
///   logistic: -(E log D(x) + E log(1 - D(G(z))))
///   hinge:    E max(0, 1 - D(x)) + E max(0, 1 + D(G(z)))   (logits only)
/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before the log.
ad::Var d_adv_loss(const DiscriminatorScores& scores, DLossKind kind);

///   saturating:    E log(1 - D(G(z)))
///   nonsaturating: -E log D(G(z))
///   hinge:         -E D(G(z))   (logits only)
ad::Var g_adv_loss(const ad::Var& fake_scores, ScoreKind score_kind, GLossKind kind);

double d_adv_loss(const Matrix& real, const Matrix& fake, ScoreKind score_kind, DLossKind kind);
double g_adv_loss(const Matrix& fake, ScoreKind score_kind, GLossKind kind);

/// Effective weights of the distillation terms. A zero weight removes the
/// term from the objective entirely.
struct LossWeights {
  double agkd = 1.0;
  double cgkd_kd = 1.0;
  double cgkd_pd = 1.0;
  /// Whether the generator also minimizes the correlation KD term through
  /// the teacher path (C_T depends on G).
  bool cgkd_kd_to_generator = true;
};

/// Which term updates which network. Components are keyed "d/<term>" or
/// "g/<term>" and hold weighted contributions; the "d/" entries sum to
/// d_loss and the "g/" entries to g_loss.
struct ObjectiveBundle {
  double d_loss = 0.0;
  double g_loss = 0.0;
  std::map<std::string, double> components;
};

/// Discriminator side: adv_d + w_agkd * L_AGKD + w_cgkd * L^KD_CGKD.
/// Null terms are treated as disabled.
ad::Var discriminator_objective(const ad::Var& adv_d, const ad::Var* agkd_total,
                                const ad::Var* cgkd_kd, const LossWeights& w,
                                std::map<std::string, double>* components = nullptr);

/// Generator side: adv_g + w_pd * L^PD_CGKD + w_cgkd * L^KD_CGKD (teacher path, optional).
ad::Var generator_objective(const ad::Var& adv_g, const ad::Var* cgkd_pd, const ad::Var* cgkd_kd,
                            const LossWeights& w,
                            std::map<std::string, double>* components = nullptr);

/// Value-level composition of one step's terms.
ObjectiveBundle compose_objective(double adv_d, double adv_g,
                                  const std::optional<agkd::AgkdOutput>& agkd,
                                  const std::optional<cgkd::CgkdValues>& cgkd,
                                  const LossWeights& w);

}  // namespace kdgan::adversarial
