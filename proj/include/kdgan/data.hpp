// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kdgan/autodiff.hpp"
#include "kdgan/rng.hpp"
#include "kdgan/tensor.hpp"

namespace kdgan {

enum class DataFormat { image_folder, packed_binary, synthetic_modes };

DataFormat parse_data_format(const std::string& s);
std::string to_string(DataFormat f);

struct SyntheticModesSpec {
  int num_modes = 8;
  int image_size = 8;
  int channels = 1;
  int samples_per_mode = 100;
  std::uint64_t seed = 7;
  double jitter = 0.1;  // std of additive pixel noise
};

struct DatasetSpec {
  DataFormat format = DataFormat::synthetic_modes;
  std::string root;
  double fraction = 1.0;
  std::uint64_t subset_seed = 0;
  std::vector<std::string> class_names;  // empty: derived from the source
  ImageShape shape;                      // expected image shape for file formats
  SyntheticModesSpec synthetic;
};

/// An immutable, fully materialized dataset.
struct Dataset {
  ImageShape shape;
  Matrix images;  // [N x C*H*W], values in [-1, 1]
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<Index> source_indices;  // positions in the unsubsetted source
  Matrix templates;                   // synthetic only: [num_modes x C*H*W]
  std::vector<std::string> warnings;

  Index size() const { return images.rows(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  ImageBatch gather(const std::vector<Index>& rows, bool with_labels) const;
  /// Hash of the selected source indices.
  std::uint64_t index_hash() const;
  std::uint64_t pixel_hash() const { return hash_matrix(images); }
};

/// Stratified subset of size round(fraction * N). Each class receives
/// floor(fraction * n_c) or one more (largest remainders first). Indices are
/// returned in ascending order. Classes left empty produce a warning.
std::vector<Index> stratified_subset(const std::vector<int>& labels, int num_classes,
                                     double fraction, std::uint64_t seed,
                                     std::vector<std::string>* warnings = nullptr);

/// Loads the whole source described by `spec` (no subsetting).
Dataset load_full(const DatasetSpec& spec);

/// Loads the source described by `spec` and applies stratified subsetting.
Dataset load_subset(const DatasetSpec& spec);

/// Renders num_modes disjoint block templates plus seeded pixel jitter.
Dataset make_synthetic_modes(const SyntheticModesSpec& spec);

/// root/<class_name>/*.png; classes sorted by name unless `class_names` is given.
Dataset read_image_folder(const std::string& root, const ImageShape& shape,
                          const std::vector<std::string>& class_names);

/// Records of 1 label byte + C*H*W planar pixel bytes. `root` is a file or a
/// directory of *.bin files read in name order.
Dataset read_packed_binary(const std::string& root, const ImageShape& shape,
                           const std::vector<std::string>& class_names);

Dataset subset(const Dataset& full, const std::vector<Index>& rows);

enum class AugmentPolicy { none, basic };

AugmentPolicy parse_augment_policy(const std::string& s);

/// Per-sample translation and cutout parameters shared by the real and fake
/// batches of one step.
struct AugmentDraw {
  std::vector<std::pair<int, int>> shifts;  // (dx, dy), |d| <= max(1, size / 8)
  struct Cutout {
    int x0, y0, size;  // square, clipped to the image; size <= size / 2
  };
  std::vector<Cutout> cutouts;
};

AugmentDraw draw_augment(RngStream& stream, Index batch, const ImageShape& shape);

/// Translation (zero fill) then cutout (zero fill); differentiable in the images.
ad::Var apply_augment(const ad::Var& images, const ImageShape& shape, const AugmentDraw& draw);

ImageBatch augment(const ImageBatch& batch, AugmentPolicy policy, RngStream& stream);

}  // namespace kdgan
