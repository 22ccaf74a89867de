// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "kdgan/data.hpp"
#include "kdgan/errors.hpp"
#include "kdgan/metrics.hpp"
#include "kdgan/numerics.hpp"
#include "kdgan/png_io.hpp"
#include "test_util.hpp"

using namespace kdgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kdgan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<int> cyclic_labels(int n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % classes;
  return y;
}

}  // namespace

TEST_CASE("fraction one returns every index") {
  auto y = cyclic_labels(37, 4);
  auto idx = stratified_subset(y, 4, 1.0, 3);
  REQUIRE(idx.size() == 37);
  for (Index i = 0; i < 37; ++i) CHECK(idx[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("subset size and stratification on 50000 labels") {
  auto y = cyclic_labels(50000, 10);
  auto idx = stratified_subset(y, 10, 0.1, 42);
  CHECK(idx.size() == 5000);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::set<Index>(idx.begin(), idx.end()).size() == idx.size());
  std::map<int, int> per_class;
  for (Index i : idx) ++per_class[y[static_cast<std::size_t>(i)]];
  for (int c = 0; c < 10; ++c) CHECK(per_class[c] == 500);
}

TEST_CASE("uneven classes get floor quotas plus largest remainders") {
  // Class sizes 7, 5, 3 at 0.5: exact 3.5, 2.5, 1.5 -> total round(7.5) = 8.
  std::vector<int> y;
  int c = 0;
  for (int n : {7, 5, 3}) y.insert(y.end(), static_cast<std::size_t>(n), c++);
  auto idx = stratified_subset(y, 3, 0.5, 1);
  CHECK(idx.size() == 8);
  std::map<int, int> per;
  for (Index i : idx) ++per[y[static_cast<std::size_t>(i)]];
  for (c = 0; c < 3; ++c) {
    const double exact = 0.5 * std::count(y.begin(), y.end(), c);
    CHECK(per[c] >= static_cast<int>(std::floor(exact)));
    CHECK(per[c] <= static_cast<int>(std::floor(exact)) + 1);
  }
}

TEST_CASE("subset is a function of the seed") {
  auto y = cyclic_labels(1000, 5);
  CHECK(stratified_subset(y, 5, 0.3, 9) == stratified_subset(y, 5, 0.3, 9));
  CHECK(stratified_subset(y, 5, 0.3, 9) != stratified_subset(y, 5, 0.3, 10));
}

TEST_CASE("empty classes and bad fractions") {
  std::vector<std::string> warnings;
  auto idx = stratified_subset({0, 0, 2, 2}, 3, 0.5, 1, &warnings);
  CHECK(idx.size() == 2);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(stratified_subset({0, 1}, 2, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(stratified_subset({0, 1}, 2, 1.5, 1), InvalidArgument);
}

TEST_CASE("synthetic modes dataset") {
  SyntheticModesSpec spec;
  Dataset d = make_synthetic_modes(spec);
  CHECK(d.size() == 800);
  CHECK(d.num_classes() == 8);
  CHECK(d.templates.rows() == 8);
  CHECK(d.images.maxCoeff() <= 1.0);
  CHECK(d.images.minCoeff() >= -1.0);
  std::set<int> labels(d.labels.begin(), d.labels.end());
  CHECK(labels.size() == 8);

  // Nearest template recovers the label of every sample.
  int correct = 0;
  for (Index i = 0; i < d.size(); ++i) {
    Index best = 0;
    double best_d = 1e300;
    for (Index k = 0; k < d.templates.rows(); ++k) {
      double dist = (d.images.row(i) - d.templates.row(k)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    correct += best == d.labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  CHECK(correct == 800);
  CHECK(make_synthetic_modes(spec).pixel_hash() == d.pixel_hash());
  spec.seed = 8;
  CHECK(make_synthetic_modes(spec).pixel_hash() != d.pixel_hash());
}

TEST_CASE("load_subset is reproducible") {
  DatasetSpec spec;
  spec.fraction = 0.25;
  spec.subset_seed = 5;
  Dataset a = load_subset(spec), b = load_subset(spec);
  CHECK(a.size() == 200);
  CHECK(a.index_hash() == b.index_hash());
  CHECK(a.pixel_hash() == b.pixel_hash());
  spec.subset_seed = 6;
  CHECK(load_subset(spec).index_hash() != a.index_hash());
}

TEST_CASE("augment none is the identity and basic keeps the range") {
  Dataset d = make_synthetic_modes({});
  ImageBatch batch = d.gather({0, 5, 100, 799}, true);
  RngStream s(1, "augment");
  ImageBatch same = augment(batch, AugmentPolicy::none, s);
  CHECK(same.data == batch.data);
  CHECK(same.labels == batch.labels);
  for (int i = 0; i < 50; ++i) {
    ImageBatch out = augment(batch, AugmentPolicy::basic, s);
    CHECK(out.data.maxCoeff() <= 1.0);
    CHECK(out.data.minCoeff() >= -1.0);
    CHECK(out.labels == batch.labels);
  }
  CHECK_THROWS_AS(parse_augment_policy("flip"), InvalidArgument);
}

TEST_CASE("augment draws respect their bounds") {
  ImageShape shape{1, 16, 16};
  RngStream s(2, "augment");
  for (int i = 0; i < 200; ++i) {
    AugmentDraw d = draw_augment(s, 3, shape);
    for (auto [dx, dy] : d.shifts) {
      CHECK(std::abs(dx) <= 2);
      CHECK(std::abs(dy) <= 2);
    }
    for (const auto& c : d.cutouts) {
      CHECK(c.size >= 1);
      CHECK(c.size <= 8);
    }
  }
}

TEST_CASE("a shared draw moves a marker identically in real and fake batches") {
  ImageShape shape{1, 8, 8};
  Matrix marker = Matrix::Constant(1, 64, -1.0);
  marker(0, 3 * 8 + 2) = 1.0;  // (x=2, y=3)
  AugmentDraw draw;
  draw.shifts = {{1, 2}};
  draw.cutouts = {{7, 0, 1}};
  Matrix real = apply_augment(ad::Var::constant(marker), shape, draw).value();
  Matrix fake = apply_augment(ad::Var::constant(marker), shape, draw).value();
  CHECK(real == fake);
  CHECK(real(0, 5 * 8 + 3) == 1.0);
  CHECK(real(0, 3 * 8 + 2) == -1.0);
  CHECK(real(0, 7) == 0.0);  // cutout
  CHECK(real(0, 0) == 0.0);  // zero fill from the shift
}

TEST_CASE("gradients pass through augmentation") {
  ImageShape shape{2, 4, 4};
  RngStream s(3, "augment");
  AugmentDraw draw = draw_augment(s, 3, shape);
  Matrix x = s.normal_matrix(3, 32), w = s.normal_matrix(3, 32);
  GradCheckReport r = check_gradients(
      [&](const std::vector<ad::Var>& v) {
        return ad::sum(ad::tanh(ad::mul_const(apply_augment(v[0], shape, draw), w)));
      },
      {{"images", x}});
  INFO(r.to_string());
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("image folder round trip") {
  fs::path root = scratch_dir("folder");
  const std::vector<std::string> classes{"b_class", "a_class"};
  std::map<std::string, std::vector<std::uint8_t>> written;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    fs::create_directories(root / classes[c]);
    for (int k = 0; k < 3; ++k) {
      RawImage img{4, 4, 1, std::vector<std::uint8_t>(16)};
      for (int p = 0; p < 16; ++p) img.pixels[static_cast<std::size_t>(p)] =
          static_cast<std::uint8_t>((p * 13 + k * 50 + static_cast<int>(c) * 7) % 256);
      std::string path = (root / classes[c] / ("img" + std::to_string(k) + ".png")).string();
      write_png(path, img);
      written[classes[c] + std::to_string(k)] = img.pixels;
    }
  }
  Dataset d = read_image_folder(root.string(), {1, 4, 4}, {});
  CHECK(d.size() == 6);
  CHECK(d.class_names == std::vector<std::string>{"a_class", "b_class"});
  CHECK(d.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  const auto& px = written["a_class0"];
  for (int p = 0; p < 16; ++p)
    CHECK(d.images(0, p) == doctest::Approx(px[static_cast<std::size_t>(p)] / 127.5 - 1.0));
  CHECK_THROWS_AS(read_image_folder((root / "missing").string(), {1, 4, 4}, {}), IoError);
  CHECK_THROWS_AS(read_image_folder(root.string(), {1, 5, 5}, {}), IoError);
  fs::remove_all(root);
}

TEST_CASE("packed binary round trip") {
  fs::path root = scratch_dir("packed");
  ImageShape shape{3, 2, 2};
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 4; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(r % 2));
    for (int p = 0; p < 12; ++p) bytes.push_back(static_cast<std::uint8_t>(r * 20 + p));
  }
  std::ofstream(root / "part0.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  Dataset d = read_packed_binary(root.string(), shape, {"zero", "one"});
  CHECK(d.size() == 4);
  CHECK(d.labels == std::vector<int>{0, 1, 0, 1});
  CHECK(d.class_names == std::vector<std::string>{"zero", "one"});
  CHECK(d.images(2, 5) == doctest::Approx(45 / 127.5 - 1.0));

  Dataset dflt = read_packed_binary((root / "part0.bin").string(), shape, {});
  CHECK(dflt.class_names == std::vector<std::string>{"class0", "class1"});

  std::ofstream(root / "part1.bin", std::ios::binary).write("\x00\x01", 2);
  CHECK_THROWS(read_packed_binary(root.string(), shape, {}));
  fs::remove_all(root);
}
