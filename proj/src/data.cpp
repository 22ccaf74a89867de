// SPDX-License-Identifier: Apache-2.0
#include "kdgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "kdgan/errors.hpp"
#include "kdgan/png_io.hpp"

namespace fs = std::filesystem;

namespace kdgan {

DataFormat parse_data_format(const std::string& s) {
  if (s == "image_folder") return DataFormat::image_folder;
  if (s == "packed_binary") return DataFormat::packed_binary;
  if (s == "synthetic_modes") return DataFormat::synthetic_modes;
  throw InvalidArgument("unknown data.format '" + s +
                        "' (expected image_folder, packed_binary or synthetic_modes)");
}

std::string to_string(DataFormat f) {
  switch (f) {
    case DataFormat::image_folder: return "image_folder";
    case DataFormat::packed_binary: return "packed_binary";
    case DataFormat::synthetic_modes: return "synthetic_modes";
  }
  return "?";
}

ImageBatch Dataset::gather(const std::vector<Index>& rows, bool with_labels) const {
  ImageBatch out;
  out.shape = shape;
  out.data.resize(static_cast<Index>(rows.size()), images.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.data.row(static_cast<Index>(i)) = images.row(rows[i]);
    if (with_labels) out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

std::uint64_t Dataset::index_hash() const {
  std::vector<std::int64_t> idx(source_indices.begin(), source_indices.end());
  return fnv1a(idx.data(), idx.size() * sizeof(std::int64_t));
}

namespace {

template <class T>
void seeded_shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::string> default_class_names(int n, const std::string& prefix) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

std::vector<Index> stratified_subset(const std::vector<int>& labels, int num_classes,
                                     double fraction, std::uint64_t seed,
                                     std::vector<std::string>* warnings) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidArgument("data.fraction must lie in (0, 1], got " + std::to_string(fraction));
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  if (fraction == 1.0) {
    std::vector<Index> all(labels.size());
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }

  const auto total = static_cast<long long>(std::llround(fraction * static_cast<double>(labels.size())));
  std::vector<long long> quota(by_class.size());
  std::vector<double> remainder(by_class.size());
  long long assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<long long>(std::floor(exact + 1e-9));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(by_class.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k) {
    const std::size_t c = order[k];
    if (quota[c] < static_cast<long long>(by_class[c].size())) {
      ++quota[c];
      ++assigned;
    }
  }

  RngStream rng(seed, "subset");
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<Index> members = by_class[c];
    seeded_shuffle(members, rng);
    members.resize(static_cast<std::size_t>(quota[c]));
    out.insert(out.end(), members.begin(), members.end());
    if (quota[c] == 0 && warnings)
      warnings->push_back("class " + std::to_string(c) + " is empty after subsetting");
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset subset(const Dataset& full, const std::vector<Index>& rows) {
  Dataset out;
  out.shape = full.shape;
  out.class_names = full.class_names;
  out.templates = full.templates;
  out.warnings = full.warnings;
  out.images.resize(static_cast<Index>(rows.size()), full.images.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.images.row(static_cast<Index>(i)) = full.images.row(rows[i]);
    out.labels.push_back(full.labels[rows[i]]);
    out.source_indices.push_back(full.source_indices[rows[i]]);
  }
  return out;
}

Dataset make_synthetic_modes(const SyntheticModesSpec& spec) {
  if (spec.num_modes < 2)
    throw InvalidArgument("synthetic modes need num_modes >= 2, got " +
                          std::to_string(spec.num_modes));
  if (spec.image_size < 1 || spec.samples_per_mode < 1 || spec.channels < 1)
    throw InvalidArgument("synthetic modes need positive image_size, channels, samples_per_mode");
  const int s = spec.image_size;
  const int grid_rows = std::max(1, static_cast<int>(std::floor(std::sqrt(spec.num_modes))));
  const int grid_cols = (spec.num_modes + grid_rows - 1) / grid_rows;
  if (grid_rows > s || grid_cols > s)
    throw InvalidArgument("image_size " + std::to_string(s) + " too small for " +
                          std::to_string(spec.num_modes) + " disjoint mode blocks");

  Dataset out;
  out.shape = {spec.channels, s, s};
  const Index pixels = out.shape.size();
  out.templates = Matrix::Constant(spec.num_modes, pixels, -1.0);
  for (int m = 0; m < spec.num_modes; ++m) {
    const int gr = m / grid_cols, gc = m % grid_cols;
    const int y0 = gr * s / grid_rows, y1 = (gr + 1) * s / grid_rows;
    const int x0 = gc * s / grid_cols, x1 = (gc + 1) * s / grid_cols;
    for (int c = 0; c < spec.channels; ++c)
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) out.templates(m, (static_cast<Index>(c) * s + y) * s + x) = 1.0;
  }

  RngStream rng(spec.seed, "synthetic_modes");
  const Index n = static_cast<Index>(spec.num_modes) * spec.samples_per_mode;
  out.images.resize(n, pixels);
  for (int m = 0; m < spec.num_modes; ++m)
    for (int i = 0; i < spec.samples_per_mode; ++i) {
      const Index row = static_cast<Index>(m) * spec.samples_per_mode + i;
      for (Index p = 0; p < pixels; ++p)
        out.images(row, p) = std::clamp(out.templates(m, p) + spec.jitter * rng.normal(), -1.0, 1.0);
      out.labels.push_back(m);
    }
  out.class_names = default_class_names(spec.num_modes, "mode");
  out.source_indices.resize(static_cast<std::size_t>(n));
  std::iota(out.source_indices.begin(), out.source_indices.end(), Index{0});
  return out;
}

Dataset read_image_folder(const std::string& root, const ImageShape& shape,
                          const std::vector<std::string>& class_names) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory", root);
  std::vector<std::string> classes = class_names;
  if (classes.empty()) {
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());
  }
  if (classes.empty()) throw IoError("no class directories found", root);

  Dataset out;
  out.shape = shape;
  out.class_names = classes;
  std::vector<RowVector> rows;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const fs::path dir = fs::path(root) / classes[c];
    if (!fs::is_directory(dir)) throw IoError("missing class directory", dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      RawImage img = read_png(file.string(), shape.channels);
      if (img.width != shape.width || img.height != shape.height)
        throw IoError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          ", expected " + std::to_string(shape.width) + "x" +
                          std::to_string(shape.height),
                      file.string());
      RowVector r(shape.size());
      // interleaved HWC bytes -> planar CHW in [-1, 1]
      for (int ch = 0; ch < shape.channels; ++ch)
        for (int y = 0; y < shape.height; ++y)
          for (int x = 0; x < shape.width; ++x)
            r((static_cast<Index>(ch) * shape.height + y) * shape.width + x) =
                img.pixels[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + ch] /
                    127.5 -
                1.0;
      rows.push_back(std::move(r));
      out.labels.push_back(static_cast<int>(c));
    }
  }
  out.images.resize(static_cast<Index>(rows.size()), shape.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.images.row(static_cast<Index>(i)) = rows[i];
  out.source_indices.resize(rows.size());
  std::iota(out.source_indices.begin(), out.source_indices.end(), Index{0});
  return out;
}

Dataset read_packed_binary(const std::string& root, const ImageShape& shape,
                           const std::vector<std::string>& class_names) {
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .bin files found", root);
  } else if (fs::is_regular_file(root)) {
    files.emplace_back(root);
  } else {
    throw IoError("packed dataset not found", root);
  }

  const std::size_t record = 1 + static_cast<std::size_t>(shape.size());
  std::vector<std::uint8_t> bytes;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open", file.string());
    std::vector<std::uint8_t> chunk((std::istreambuf_iterator<char>(in)), {});
    if (chunk.size() % record != 0)
      throw IoError("file size " + std::to_string(chunk.size()) + " is not a multiple of the " +
                        std::to_string(record) + "-byte record",
                    file.string());
    bytes.insert(bytes.end(), chunk.begin(), chunk.end());
  }

  Dataset out;
  out.shape = shape;
  const Index n = static_cast<Index>(bytes.size() / record);
  out.images.resize(n, shape.size());
  int max_label = -1;
  for (Index i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + static_cast<std::size_t>(i) * record;
    out.labels.push_back(rec[0]);
    max_label = std::max(max_label, static_cast<int>(rec[0]));
    for (Index p = 0; p < shape.size(); ++p) out.images(i, p) = rec[1 + p] / 127.5 - 1.0;
  }
  out.class_names = class_names.empty() ? default_class_names(max_label + 1, "class") : class_names;
  if (max_label >= out.num_classes())
    throw InvalidArgument("packed dataset has label " + std::to_string(max_label) + " but only " +
                          std::to_string(out.num_classes()) + " class names");
  out.source_indices.resize(static_cast<std::size_t>(n));
  std::iota(out.source_indices.begin(), out.source_indices.end(), Index{0});
  return out;
}

Dataset load_full(const DatasetSpec& spec) {
  Dataset full;
  switch (spec.format) {
    case DataFormat::synthetic_modes: full = make_synthetic_modes(spec.synthetic); break;
    case DataFormat::image_folder: full = read_image_folder(spec.root, spec.shape, spec.class_names); break;
    case DataFormat::packed_binary: full = read_packed_binary(spec.root, spec.shape, spec.class_names); break;
  }
  if (spec.format == DataFormat::synthetic_modes && !spec.class_names.empty()) {
    if (static_cast<int>(spec.class_names.size()) != full.num_classes())
      throw InvalidArgument("data.class_names has " + std::to_string(spec.class_names.size()) +
                            " entries for " + std::to_string(full.num_classes()) + " modes");
    full.class_names = spec.class_names;
  }
  if (full.size() == 0) throw InvalidArgument("dataset is empty");
  return full;
}

Dataset load_subset(const DatasetSpec& spec) {
  Dataset full = load_full(spec);
  std::vector<std::string> warnings;
  auto rows = stratified_subset(full.labels, full.num_classes(), spec.fraction, spec.subset_seed,
                                &warnings);
  Dataset out = subset(full, rows);
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  return out;
}

AugmentPolicy parse_augment_policy(const std::string& s) {
  if (s == "none") return AugmentPolicy::none;
  if (s == "basic") return AugmentPolicy::basic;
  throw InvalidArgument("unknown data.augment '" + s + "' (expected none or basic)");
}

AugmentDraw draw_augment(RngStream& stream, Index batch, const ImageShape& shape) {
  AugmentDraw d;
  const int max_dx = std::max(1, shape.width / 8);
  const int max_dy = std::max(1, shape.height / 8);
  const int max_cut = std::max(1, std::min(shape.width, shape.height) / 2);
  for (Index b = 0; b < batch; ++b) {
    const int dx = stream.uniform_int(-max_dx, max_dx);
    const int dy = stream.uniform_int(-max_dy, max_dy);
    d.shifts.emplace_back(dx, dy);
    const int size = stream.uniform_int(1, max_cut);
    const int cx = stream.uniform_int(0, shape.width - 1);
    const int cy = stream.uniform_int(0, shape.height - 1);
    d.cutouts.push_back({cx - size / 2, cy - size / 2, size});
  }
  return d;
}

ad::Var apply_augment(const ad::Var& images, const ImageShape& shape, const AugmentDraw& draw) {
  if (static_cast<Index>(draw.shifts.size()) != images.rows() ||
      static_cast<Index>(draw.cutouts.size()) != images.rows())
    throw InvalidArgument("augment draw does not match batch size");
  ad::Var moved = ad::translate(images, shape, draw.shifts);
  Matrix mask = Matrix::Ones(images.rows(), images.cols());
  for (Index b = 0; b < images.rows(); ++b) {
    const auto& c = draw.cutouts[static_cast<std::size_t>(b)];
    for (int ch = 0; ch < shape.channels; ++ch)
      for (int y = std::max(0, c.y0); y < std::min(shape.height, c.y0 + c.size); ++y)
        for (int x = std::max(0, c.x0); x < std::min(shape.width, c.x0 + c.size); ++x)
          mask(b, (static_cast<Index>(ch) * shape.height + y) * shape.width + x) = 0.0;
  }
  return ad::mul_const(moved, mask);
}

ImageBatch augment(const ImageBatch& batch, AugmentPolicy policy, RngStream& stream) {
  if (policy == AugmentPolicy::none) return batch;
  AugmentDraw draw = draw_augment(stream, batch.batch(), batch.shape);
  ImageBatch out = batch;
  out.data = apply_augment(ad::Var::constant(batch.data), batch.shape, draw).value();
  return out;
}

}  // namespace kdgan
