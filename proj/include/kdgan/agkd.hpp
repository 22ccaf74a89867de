// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kdgan/autodiff.hpp"
#include "kdgan/rng.hpp"
#include "kdgan/tensor.hpp"

/// Aggregated generative knowledge distillation.
///
/// The discriminator's projected features on real and generated images are
/// pulled toward the teacher's image features (mimicry term), and with
/// probability p also toward the teacher features of the *opposite* branch
/// (aggregation term), which blurs the real/fake boundary in feature space.
namespace kdgan::agkd {

/// Teacher features I(x), I(G(z)) and student features D^f(x), D^f(G(z)).
/// All four share one [B x M] shape.
template <class T>
struct Inputs {
  T teacher_real;
  T teacher_fake;
  T student_real;
  T student_fake;
};

using AgkdInputs = Inputs<FeatureBatch>;
using AgkdVars = Inputs<ad::Var>;

struct GateConfig {
  double p = 0.7;
  RngStream* stream = nullptr;  // the gate's named stream; draws are serialized by the caller

  void validate() const;
};

struct AgkdOutput {
  double l_kd = 0.0;
  double l_agg_raw = 0.0;
  bool gate_open = false;
  double l_total = 0.0;
};

struct AgkdTerms {
  ad::Var l_kd;
  ad::Var l_agg_raw;
  bool gate_open = false;
  ad::Var l_total;

  AgkdOutput values() const;
};

/// |I(x) - D^f(x)| + |I(G(z)) - D^f(G(z))|, each term a mean over entries.
ad::Var kd_loss(const AgkdVars& in);
double kd_loss(const AgkdInputs& in);

/// |I(x) - D^f(G(z))| + |I(G(z)) - D^f(x)|
ad::Var agg_loss(const AgkdVars& in);
double agg_loss(const AgkdInputs& in);

/// Draws q ~ U[0,1) from the gate stream and opens iff q <= p.
bool sample_gate(const GateConfig& cfg);

/// l_kd + agg_weight * l_agg when the gate opens, l_kd otherwise. Exactly one
/// gate draw per call.
AgkdTerms total(const AgkdVars& in, const GateConfig& cfg, double agg_weight = 1.0);
AgkdOutput total(const AgkdInputs& in, const GateConfig& cfg, double agg_weight = 1.0);

}  // namespace kdgan::agkd
