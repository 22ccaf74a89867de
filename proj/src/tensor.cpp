// SPDX-License-Identifier: Apache-2.0
#include "kdgan/tensor.hpp"

#include <cmath>
#include <sstream>

#include "kdgan/errors.hpp"

namespace kdgan {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

FeatureBatch::FeatureBatch(Matrix data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw InvalidArgument("FeatureBatch needs B >= 1 and M >= 1, got " + shape_string(data_));
  if (!data_.allFinite()) throw InvalidArgument("FeatureBatch contains non-finite entries");
}

TextFeatureSet::TextFeatureSet(Matrix data, std::vector<std::string> labels)
    : data_(std::move(data)), labels_(std::move(labels)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw InvalidArgument("TextFeatureSet needs K >= 1 and M >= 1, got " + shape_string(data_));
  if (static_cast<Index>(labels_.size()) != data_.rows())
    throw InvalidArgument("TextFeatureSet has " + std::to_string(data_.rows()) + " rows but " +
                          std::to_string(labels_.size()) + " labels");
  if (!data_.allFinite()) throw InvalidArgument("TextFeatureSet contains non-finite entries");
  for (Index k = 0; k < data_.rows(); ++k)
    if (!(data_.row(k).norm() > 0.0))
      throw DegenerateInput("text feature row " + std::to_string(k) + " has zero norm", k);
}

void ImageBatch::validate(int num_classes) const {
  if (data.cols() != shape.size())
    throw InvalidArgument("image batch " + shape_string(data) + " does not match " +
                          std::to_string(shape.channels) + "x" + std::to_string(shape.height) +
                          "x" + std::to_string(shape.width));
  if (!data.allFinite() || data.minCoeff() < -1.0 || data.maxCoeff() > 1.0)
    throw InvalidArgument("image values must be finite and within [-1, 1]");
  if (!labels.empty()) {
    if (static_cast<Index>(labels.size()) != data.rows())
      throw InvalidArgument("label count does not match batch size");
    for (int y : labels)
      if (y < 0 || (num_classes > 0 && y >= num_classes))
        throw InvalidArgument("label " + std::to_string(y) + " out of range");
  }
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_matrix(const Matrix& m, std::uint64_t seed) {
  const std::int64_t dims[2] = {static_cast<std::int64_t>(m.rows()),
                                static_cast<std::int64_t>(m.cols())};
  std::uint64_t h = fnv1a(dims, sizeof(dims), seed);
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

std::uint64_t hash_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace kdgan
