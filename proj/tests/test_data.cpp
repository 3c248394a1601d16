#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "sdit/data.hpp"
#include "sdit/errors.hpp"
#include "sdit/image_io.hpp"

using namespace sdit;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.image_size = 32;
  s.samples_per_domain = 12;
  s.test_per_domain = 4;
  return s;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sdit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Saturation-weighted mean hue of the non-gray pixels.
double dominant_hue(const Tensor<float>& img) {
  double sx = 0, sy = 0;
  for (Index p = 0; p < img.data.rows(); ++p) {
    const double r = (img.data(p, 0) + 1) / 2, g = (img.data(p, 1) + 1) / 2, b = (img.data(p, 2) + 1) / 2;
    const double s = rgb_saturation(r, g, b);
    if (s < 0.4) continue;
    const double h = rgb_hue(r, g, b) * M_PI / 180;
    sx += s * std::cos(h);
    sy += s * std::sin(h);
  }
  double h = std::atan2(sy, sx) * 180 / M_PI;
  return h < 0 ? h + 360 : h;
}

}  // namespace

TEST_CASE("hue bands wrap through red") {
  CHECK(hue_band("red").contains(355));
  CHECK(hue_band("red").contains(5));
  CHECK_FALSE(hue_band("red").contains(20));
  CHECK(hue_band("green").contains(120));
  CHECK_THROWS_AS(hue_band("mauve"), ConfigError);
}

TEST_CASE("rgb hue of primaries") {
  CHECK(rgb_hue(1, 0, 0) == doctest::Approx(0));
  CHECK(rgb_hue(0, 1, 0) == doctest::Approx(120));
  CHECK(rgb_hue(0, 0, 1) == doctest::Approx(240));
  CHECK(rgb_saturation(0.5, 0.5, 0.5) == doctest::Approx(0));
}

TEST_CASE("dataset spec validation") {
  DatasetSpec s = small_spec();
  s.domains = {"green"};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.domains = {"green", "green"};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.domains = {"green", "teal"};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.crop_width = 20;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("synthetic dataset is deterministic per seed") {
  const DatasetSpec s = small_spec();
  const DatasetSplit a = make_synthetic_dataset(s);
  const DatasetSplit b = make_synthetic_dataset(s);
  REQUIRE(a.train.size() == 48);
  REQUIRE(a.test.size() == 16);
  for (Index i = 0; i < a.train.size(); ++i) {
    CHECK(a.train.samples[i].image.data == b.train.samples[i].image.data);
    CHECK(a.train.samples[i].label == b.train.samples[i].label);
  }
  DatasetSpec other = s;
  other.seed = 8;
  const DatasetSplit c = make_synthetic_dataset(other);
  CHECK(c.train.samples[0].image.data != a.train.samples[0].image.data);
}

TEST_CASE("synthetic samples carry their domain's hue") {
  const DatasetSpec s = small_spec();
  const DatasetSplit split = make_synthetic_dataset(s);
  for (const auto& sample : split.train.samples) {
    REQUIRE(sample.shape.has_value());
    const HueBand band = hue_band(s.domains[sample.label.zero_based()]);
    CHECK(band.contains(sample.shape->hue));
    const double h = dominant_hue(sample.image);
    CHECK(band.contains(h));
    CHECK(sample.image.data.minCoeff() >= -1.f);
    CHECK(sample.image.data.maxCoeff() <= 1.f);
  }
}

TEST_CASE("train and test splits do not share images") {
  const DatasetSplit split = make_synthetic_dataset(small_spec());
  for (const auto& t : split.test.samples) {
    for (const auto& r : split.train.samples) CHECK(t.image.data != r.image.data);
  }
}

TEST_CASE("shape coverage is bounded and nonempty") {
  ShapeParams p;
  p.radius = 0.3;
  for (ShapeKind k : {ShapeKind::circle, ShapeKind::square, ShapeKind::triangle}) {
    p.kind = k;
    const auto cov = shape_coverage(p, 32);
    double total = 0;
    for (float c : cov) {
      CHECK(c >= 0.f);
      CHECK(c <= 1.f);
      total += c;
    }
    CHECK(total > 32);
  }
  p.kind = ShapeKind::circle;
  const auto cov = shape_coverage(p, 64);
  double area = 0;
  for (float c : cov) area += c;
  CHECK(area / (64.0 * 64.0) == doctest::Approx(M_PI * 0.09).epsilon(0.02));
}

TEST_CASE("folder round trip stays within one gray level") {
  const DatasetSpec s = small_spec();
  const DatasetSplit split = make_synthetic_dataset(s);
  const auto dir = scratch_dir("roundtrip");
  write_folder_dataset(split.test, dir);
  DatasetSpec fs = s;
  fs.kind = DatasetKind::folder;
  const Dataset loaded = load_folder_dataset(dir, fs);
  REQUIRE(loaded.size() == split.test.size());
  for (Index i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.samples[i].label == split.test.samples[i].label);
    const double err = (loaded.samples[i].image.data - split.test.samples[i].image.data).cwiseAbs().maxCoeff();
    CHECK(err <= 1.0 / 255 + 1e-6);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("folder loader reports missing domains and bad files") {
  const auto dir = scratch_dir("broken");
  DatasetSpec s = small_spec();
  s.kind = DatasetKind::folder;
  CHECK_THROWS_AS(load_folder_dataset(dir, s), DataError);
  for (const auto& d : s.domains) std::filesystem::create_directories(dir / d);
  {
    std::ofstream bad(dir / "green" / "00000.png");
    bad << "not an image";
  }
  CHECK_THROWS_AS(load_folder_dataset(dir, s), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("resize and crop shapes") {
  const Tensor<float> img = Tensor<float>::constant(Shape{2, 20, 40, 3}, 0.5f);
  const Tensor<float> c = center_crop(img, 10, 20);
  CHECK(c.shape == Shape{2, 10, 20, 3});
  const Tensor<float> z = resize_bilinear(c, 8, 8);
  CHECK(z.shape == Shape{2, 8, 8, 3});
  CHECK(z.data.isApproxToConstant(0.5f));
}

TEST_CASE("batch iterator covers each epoch once and drops the remainder") {
  DatasetSpec s = small_spec();
  s.samples_per_domain = 5;  // 20 samples
  const Dataset data = make_synthetic_dataset(s).train;
  BatchIterator it(data, 3, 11);
  CHECK(it.batches_per_epoch() == 6);
  std::multiset<Index> seen;
  for (int b = 0; b < 6; ++b) {
    const Batch batch = it.next();
    CHECK(batch.images.shape.n == 3);
    seen.insert(batch.indices.begin(), batch.indices.end());
  }
  CHECK(seen.size() == 18);
  CHECK(std::set<Index>(seen.begin(), seen.end()).size() == 18);
  CHECK(it.state() == IteratorState{1, 0});
  CHECK_THROWS_AS(BatchIterator(data, 21, 1), ConfigError);
}

TEST_CASE("batch iterator is reproducible and restorable") {
  const Dataset data = make_synthetic_dataset(small_spec()).train;
  BatchIterator a(data, 4, 3), b(data, 4, 3), c(data, 4, 4);
  bool differs = false;
  for (int i = 0; i < 30; ++i) {
    const Batch x = a.next(), y = b.next(), z = c.next();
    CHECK(x.indices == y.indices);
    differs = differs || x.indices != z.indices;
  }
  CHECK(differs);
  BatchIterator r(data, 4, 3);
  r.restore(a.state());
  CHECK(r.next().indices == a.next().indices);
}

TEST_CASE("target labels are uniform") {
  std::mt19937_64 rng(5);
  const int c = 4;
  const std::vector<DomainLabel> src(10000, DomainLabel(2, c));
  const auto t = sample_target_labels(src, c, rng);
  std::map<int, int> counts;
  for (const auto& l : t) ++counts[l.index];
  const double expected = 10000.0 / c, sigma = std::sqrt(10000.0 * 0.25 * 0.75);
  for (int d = 1; d <= c; ++d) CHECK(std::abs(counts[d] - expected) <= 3 * sigma);
}

TEST_CASE("single domain targets are always that domain") {
  std::mt19937_64 rng(1);
  const std::vector<DomainLabel> src(20, DomainLabel(1, 1));
  for (const auto& l : sample_target_labels(src, 1, rng)) CHECK(l.index == 1);
}

TEST_CASE("grid composition size") {
  const Tensor<float> img = Tensor<float>::constant(Shape{1, 8, 8, 3}, 0.f);
  std::vector<std::vector<Tensor<float>>> cells(2, std::vector<Tensor<float>>(3, img));
  const Raster g = compose_grid(cells, {}, {}, 2);
  CHECK(g.width == 3 * 8 + 4 * 2);
  CHECK(g.height == 2 * 8 + 3 * 2);
}
