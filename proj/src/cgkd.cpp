// SPDX-License-Identifier: Apache-2.0
#include "kdgan/cgkd.hpp"

#include "kdgan/errors.hpp"
#include "kdgan/numerics.hpp"

namespace kdgan::cgkd {

const char* to_string(Source s) { return s == Source::teacher ? "teacher" : "student"; }

CorrelationMatrix build_correlation(const ad::Var& features, const TextFeatureSet& texts,
                                    Source source) {
  if (features.cols() != texts.dim())
    throw InvalidArgument("correlation: feature dim " + std::to_string(features.cols()) +
                          " does not match text dim " + std::to_string(texts.dim()));
  ad::Var raw = ad::matmul_nt(features, ad::Var::constant(texts.data()));
  return {ad::row_l2_normalize(raw, kNormEps), source};
}

CorrelationMatrix build_correlation(const FeatureBatch& features, const TextFeatureSet& texts,
                                    Source source) {
  return build_correlation(ad::Var::constant(features.data()), texts, source);
}

ad::Var pairwise_diversity_loss(const CorrelationMatrix& c, bool ordered_pairs) {
  if (c.batch() < 2)
    throw InvalidArgument("pairwise diversity needs at least 2 rows, got " +
                          std::to_string(c.batch()));
  ad::Var unit = ad::row_l2_normalize(c.data, kNormEps);
  ad::Var gram = ad::matmul_nt(unit, unit);
  ad::Var off_diagonal = ad::sum(gram) - ad::trace(gram);
  return ordered_pairs ? off_diagonal : 0.5 * off_diagonal;
}

ad::Var correlation_kd_loss(const CorrelationMatrix& ct, const CorrelationMatrix& cs) {
  if (ct.source != Source::teacher || cs.source != Source::student)
    throw InvalidArgument(std::string("correlation KD expects (teacher, student), got (") +
                          to_string(ct.source) + ", " + to_string(cs.source) + ")");
  if (ct.batch() != cs.batch() || ct.texts() != cs.texts())
    throw InvalidArgument("correlation KD shape mismatch " + shape_string(ct.data.value()) +
                          " vs " + shape_string(cs.data.value()));
  return ad::l1_mean(ct.data, cs.data);
}

CgkdTerms total(const ad::Var& teacher_fake, const ad::Var& student_fake,
                const TextFeatureSet& texts, bool ordered_pairs) {
  if (texts.count() < 2)
    throw InvalidArgument("CGKD needs at least 2 texts, got " + std::to_string(texts.count()));
  if (teacher_fake.rows() != student_fake.rows())
    throw InvalidArgument("CGKD batch mismatch " + shape_string(teacher_fake.value()) + " vs " +
                          shape_string(student_fake.value()));
  CorrelationMatrix ct = build_correlation(teacher_fake, texts, Source::teacher);
  CorrelationMatrix cs = build_correlation(student_fake, texts, Source::student);
  CgkdTerms out;
  out.l_pd = pairwise_diversity_loss(ct, ordered_pairs);
  out.l_kd = correlation_kd_loss(ct, cs);
  out.l_total = out.l_pd + out.l_kd;
  return out;
}

CgkdValues total(const FeatureBatch& teacher_fake, const FeatureBatch& student_fake,
                 const TextFeatureSet& texts, bool ordered_pairs) {
  CgkdTerms t = total(ad::Var::constant(teacher_fake.data()),
                      ad::Var::constant(student_fake.data()), texts, ordered_pairs);
  return {t.l_pd.item(), t.l_kd.item(), t.l_total.item()};
}

}  // namespace kdgan::cgkd
