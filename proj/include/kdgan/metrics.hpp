// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kdgan/tensor.hpp"

namespace kdgan::metrics {

inline constexpr double kCovarianceJitter = 1e-6;

/// Gaussian fit of a feature distribution.
struct FeatureStats {
  Vector mean;
  Matrix covariance;  // unbiased, symmetrized
  Index n = 0;

  static FeatureStats from_features(const Matrix& features);
};

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
///
/// Both covariances get kCovarianceJitter * I. The square-root trace comes
/// from the eigenvalues of S_a^(1/2) S_b S_a^(1/2), negative ones clamped to 0.
/// Appends a warning when either n < M.
double frechet_distance(const FeatureStats& a, const FeatureStats& b,
                        std::vector<std::string>* warnings = nullptr);

/// exp(mean_i KL(p_i || mean_j p_j)); rows must sum to 1 within 1e-6.
double inception_style_score(const Matrix& probs);

/// Mean of (1 - cos(f_i, f_j)) over `num_pairs` seeded random pairs i != j.
double perceptual_diversity(const Matrix& features, int num_pairs, std::uint64_t seed);

struct ModeCoverage {
  int covered = 0;
  std::vector<Index> histogram;  // samples assigned to each template
};

/// Nearest-template (L2) assignment. A mode counts as covered when it
/// receives at least 1% of the samples (and at least one).
ModeCoverage mode_coverage(const Matrix& images, const Matrix& templates);

/// softmax(-||x - t_k||^2 / temperature); temperature <= 0 selects D / 8.
Matrix template_classifier_probs(const Matrix& images, const Matrix& templates,
                                 double temperature = 0.0);

/// softmax(logit_scale * f . t_k) over unit-norm teacher features.
Matrix zero_shot_probs(const Matrix& image_features, const Matrix& text_features,
                       double logit_scale = 10.0);

}  // namespace kdgan::metrics
