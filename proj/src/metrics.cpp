// SPDX-License-Identifier: Apache-2.0
#include "kdgan/metrics.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kdgan/errors.hpp"
#include "kdgan/numerics.hpp"
#include "kdgan/rng.hpp"

namespace kdgan::metrics {
namespace {

using DenseMatrix = Eigen::MatrixXd;

DenseMatrix sqrt_psd(const DenseMatrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(m);
  if (eig.info() != Eigen::Success)
    throw NumericFailure(std::string("eigendecomposition of ") + what + " failed");
  Vector lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

std::string conditioning_report(const DenseMatrix& m) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(m, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  if (eig.info() == Eigen::Success)
    os << "eigenvalue range [" << eig.eigenvalues().minCoeff() << ", "
       << eig.eigenvalues().maxCoeff() << "]";
  else
    os << "eigenvalues unavailable";
  return os.str();
}

Matrix softmax_rows(Matrix logits) {
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

FeatureStats FeatureStats::from_features(const Matrix& features) {
  if (features.rows() < 2) throw InvalidArgument("feature statistics need at least 2 samples");
  if (!features.allFinite()) throw InvalidArgument("feature statistics: non-finite features");
  FeatureStats s;
  s.n = features.rows();
  s.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - s.mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(s.n - 1);
  s.covariance = 0.5 * (cov + cov.transpose());
  return s;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b,
                        std::vector<std::string>* warnings) {
  const Index m = a.mean.size();
  if (b.mean.size() != m || a.covariance.rows() != m || b.covariance.rows() != m)
    throw InvalidArgument("frechet_distance: dimension mismatch " + std::to_string(m) + " vs " +
                          std::to_string(b.mean.size()));
  if (warnings && (a.n < m || b.n < m))
    warnings->push_back("frechet_distance: fewer samples than feature dimensions (" +
                        std::to_string(std::min(a.n, b.n)) + " < " + std::to_string(m) + ")");

  const DenseMatrix jitter = kCovarianceJitter * DenseMatrix::Identity(m, m);
  const DenseMatrix sa = DenseMatrix(0.5 * (a.covariance + a.covariance.transpose())) + jitter;
  const DenseMatrix sb = DenseMatrix(0.5 * (b.covariance + b.covariance.transpose())) + jitter;

  const DenseMatrix root_a = sqrt_psd(sa, "covariance");
  DenseMatrix product = root_a * sb * root_a;
  product = 0.5 * (product + product.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(product, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw NumericFailure("frechet_distance: matrix square root failed; " +
                         conditioning_report(product));
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double fd = mean_term + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(fd))
    throw NumericFailure("frechet_distance is not finite; " + conditioning_report(product));
  return std::max(fd, 0.0);
}

double inception_style_score(const Matrix& probs) {
  if (probs.rows() < 1 || probs.cols() < 1) throw InvalidArgument("inception score: empty input");
  if (!probs.allFinite() || probs.minCoeff() < 0.0)
    throw InvalidArgument("inception score: probabilities must be finite and non-negative");
  for (Index i = 0; i < probs.rows(); ++i)
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6)
      throw InvalidArgument("inception score: row " + std::to_string(i) + " sums to " +
                            std::to_string(probs.row(i).sum()));
  constexpr double eps = 1e-12;
  const RowVector marginal = probs.colwise().mean();
  double kl_sum = 0.0;
  for (Index i = 0; i < probs.rows(); ++i)
    for (Index c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      if (p > 0.0) kl_sum += p * (std::log(p + eps) - std::log(marginal(c) + eps));
    }
  return std::exp(kl_sum / static_cast<double>(probs.rows()));
}

double perceptual_diversity(const Matrix& features, int num_pairs, std::uint64_t seed) {
  const Index b = features.rows();
  if (b < 2) throw InvalidArgument("perceptual diversity needs at least 2 samples");
  if (num_pairs < 1) throw InvalidArgument("perceptual diversity needs num_pairs >= 1");
  RngStream rng(seed, "diversity");
  double total = 0.0;
  for (int k = 0; k < num_pairs; ++k) {
    const int i = rng.uniform_int(0, static_cast<int>(b - 1));
    int j = rng.uniform_int(0, static_cast<int>(b - 2));
    if (j >= i) ++j;
    total += 1.0 - cosine(features.row(i).transpose(), features.row(j).transpose());
  }
  return total / num_pairs;
}

ModeCoverage mode_coverage(const Matrix& images, const Matrix& templates) {
  if (images.cols() != templates.cols())
    throw InvalidArgument("mode_coverage: image size " + std::to_string(images.cols()) +
                          " does not match template size " + std::to_string(templates.cols()));
  ModeCoverage out;
  out.histogram.assign(static_cast<std::size_t>(templates.rows()), 0);
  for (Index i = 0; i < images.rows(); ++i) {
    Index best = 0;
    (templates.rowwise() - images.row(i)).rowwise().squaredNorm().minCoeff(&best);
    ++out.histogram[static_cast<std::size_t>(best)];
  }
  const double threshold = 0.01 * static_cast<double>(images.rows());
  for (Index count : out.histogram)
    if (count > 0 && static_cast<double>(count) >= threshold) ++out.covered;
  return out;
}

Matrix template_classifier_probs(const Matrix& images, const Matrix& templates,
                                 double temperature) {
  if (images.cols() != templates.cols())
    throw InvalidArgument("template classifier: size mismatch");
  const double t = temperature > 0.0 ? temperature : static_cast<double>(images.cols()) / 8.0;
  Matrix logits(images.rows(), templates.rows());
  for (Index i = 0; i < images.rows(); ++i)
    logits.row(i) = -(templates.rowwise() - images.row(i)).rowwise().squaredNorm().transpose() / t;
  return softmax_rows(std::move(logits));
}

Matrix zero_shot_probs(const Matrix& image_features, const Matrix& text_features,
                       double logit_scale) {
  if (image_features.cols() != text_features.cols())
    throw InvalidArgument("zero-shot classifier: feature dim mismatch");
  return softmax_rows(logit_scale * image_features * text_features.transpose());
}

}  // namespace kdgan::metrics
