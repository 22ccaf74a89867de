// SPDX-License-Identifier: Apache-2.0
#include "kdgan/agkd.hpp"

#include "kdgan/errors.hpp"

namespace kdgan::agkd {
namespace {

void check_shapes(const AgkdVars& in) {
  const Matrix& ref = in.teacher_real.value();
  for (const ad::Var* v : {&in.teacher_fake, &in.student_real, &in.student_fake})
    if (v->rows() != ref.rows() || v->cols() != ref.cols())
      throw InvalidArgument("AGKD inputs must share one shape: teacher_real " +
                            shape_string(ref) + " vs " + shape_string(v->value()));
}

AgkdVars as_constants(const AgkdInputs& in) {
  return {ad::Var::constant(in.teacher_real.data()), ad::Var::constant(in.teacher_fake.data()),
          ad::Var::constant(in.student_real.data()), ad::Var::constant(in.student_fake.data())};
}

}  // namespace

void GateConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidArgument("gate probability p must lie in [0, 1], got " + std::to_string(p));
  if (stream == nullptr) throw InvalidArgument("gate needs a random stream");
}

AgkdOutput AgkdTerms::values() const {
  return {l_kd.item(), l_agg_raw.item(), gate_open, l_total.item()};
}

ad::Var kd_loss(const AgkdVars& in) {
  check_shapes(in);
  return ad::l1_mean(in.teacher_real, in.student_real) +
         ad::l1_mean(in.teacher_fake, in.student_fake);
}

double kd_loss(const AgkdInputs& in) { return kd_loss(as_constants(in)).item(); }

ad::Var agg_loss(const AgkdVars& in) {
  check_shapes(in);
  return ad::l1_mean(in.teacher_real, in.student_fake) +
         ad::l1_mean(in.teacher_fake, in.student_real);
}

double agg_loss(const AgkdInputs& in) { return agg_loss(as_constants(in)).item(); }

bool sample_gate(const GateConfig& cfg) {
  cfg.validate();
  const double q = cfg.stream->uniform();
  return q <= cfg.p;
}

AgkdTerms total(const AgkdVars& in, const GateConfig& cfg, double agg_weight) {
  AgkdTerms out;
  out.l_kd = kd_loss(in);
  out.l_agg_raw = agg_loss(in);
  out.gate_open = sample_gate(cfg);
  out.l_total = out.gate_open ? out.l_kd + agg_weight * out.l_agg_raw : out.l_kd;
  return out;
}

AgkdOutput total(const AgkdInputs& in, const GateConfig& cfg, double agg_weight) {
  return total(as_constants(in), cfg, agg_weight).values();
}

}  // namespace kdgan::agkd
