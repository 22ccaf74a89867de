// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kdgan/autodiff.hpp"
#include "kdgan/tensor.hpp"

/// Correlated generative knowledge distillation.
///
/// Image-text correlations are row-normalized products of image features with
/// the teacher's text embeddings. The teacher's correlations on generated
/// images are diversified with a pairwise cosine penalty and distilled into
/// the discriminator's correlations with an L1 loss.
namespace kdgan::cgkd {

enum class Source { teacher, student };

const char* to_string(Source s);

/// [B x K] correlations, every row unit length.
struct CorrelationMatrix {
  ad::Var data;
  Source source = Source::teacher;

  Index batch() const { return data.rows(); }
  Index texts() const { return data.cols(); }
};

/// features * texts^T, then each row divided by its L2 norm.
CorrelationMatrix build_correlation(const ad::Var& features, const TextFeatureSet& texts,
                                    Source source);
CorrelationMatrix build_correlation(const FeatureBatch& features, const TextFeatureSet& texts,
                                    Source source);

/// Sum of cos(c_i, c_j) over ordered pairs i != j (halved when
/// `ordered_pairs` is false). Requires B >= 2.
ad::Var pairwise_diversity_loss(const CorrelationMatrix& c, bool ordered_pairs = true);

/// Mean |C_T - C_S|. `ct` must be teacher-sourced and `cs` student-sourced.
ad::Var correlation_kd_loss(const CorrelationMatrix& ct, const CorrelationMatrix& cs);

struct CgkdTerms {
  ad::Var l_pd;
  ad::Var l_kd;
  ad::Var l_total;
};

struct CgkdValues {
  double l_pd = 0.0;
  double l_kd = 0.0;
  double l_total = 0.0;
};

/// l_pd(C_T) + l_kd(C_T, C_S) with C_T from teacher features of generated
/// images and C_S from the discriminator's projected features of the same images.
CgkdTerms total(const ad::Var& teacher_fake, const ad::Var& student_fake,
                const TextFeatureSet& texts, bool ordered_pairs = true);
CgkdValues total(const FeatureBatch& teacher_fake, const FeatureBatch& student_fake,
                 const TextFeatureSet& texts, bool ordered_pairs = true);

}  // namespace kdgan::cgkd
