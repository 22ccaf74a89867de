// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace kdgan {

// Row-major so that one row is one sample and a flattened CHW image is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

std::string shape_string(const Matrix& m);

bool all_finite(const Matrix& m);

/// Image layout for batches stored as [B x C*H*W] matrices.
struct ImageShape {
  int channels = 1;
  int height = 8;
  int width = 8;

  int size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

/// A batch of feature vectors [B x M] with finite entries.
class FeatureBatch {
 public:
  FeatureBatch() = default;
  explicit FeatureBatch(Matrix data);

  const Matrix& data() const { return data_; }
  Index batch() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }

 private:
  Matrix data_;
};

/// Teacher text embeddings [K x M], one row per label string.
class TextFeatureSet {
 public:
  TextFeatureSet() = default;
  TextFeatureSet(Matrix data, std::vector<std::string> labels);

  const Matrix& data() const { return data_; }
  const std::vector<std::string>& labels() const { return labels_; }
  Index count() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }

 private:
  Matrix data_;
  std::vector<std::string> labels_;
};

/// Images [B x C*H*W] with pixel values in [-1, 1] and optional integer labels.
struct ImageBatch {
  Matrix data;
  ImageShape shape;
  std::vector<int> labels;

  Index batch() const { return data.rows(); }
  void validate(int num_classes = 0) const;
};

/// 64-bit FNV-1a over raw bytes; used for determinism hashes.
std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_matrix(const Matrix& m, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_string(const std::string& s);

}  // namespace kdgan
