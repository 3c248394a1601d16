#ifndef SDIT_DATA_HPP
#define SDIT_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdit/labels.hpp"
#include "sdit/tensor.hpp"

namespace sdit {

enum class DatasetKind { synthetic, folder };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::vector<std::string> domains{"green", "yellow", "blue", "orange"};
  int image_size = 64;
  int samples_per_domain = 800;
  int test_per_domain = 200;
  std::uint64_t seed = 7;
  std::string root;     // folder datasets and synthetic exports
  int crop_width = 0;   // 0 = no crop before resizing
  int crop_height = 0;

  int num_domains() const { return static_cast<int>(domains.size()); }
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

/// Hue interval in degrees; `lo` may be negative to wrap through red.
struct HueBand {
  double lo = 0;
  double hi = 0;
  bool contains(double hue) const;
  double center() const;
};

/// Throws ConfigError for names without a band.
HueBand hue_band(const std::string& domain);
std::vector<std::string> known_hue_domains();

enum class ShapeKind { circle, square, triangle };

/// Everything needed to re-render a synthetic sample.
struct ShapeParams {
  ShapeKind kind = ShapeKind::circle;
  double cx = 0.5;      // center, fraction of the image side
  double cy = 0.5;
  double radius = 0.25;
  double rotation = 0;  // radians
  double hue = 0;       // degrees in [0, 360)
  double saturation = 1;
  double value = 1;
  std::uint64_t texture_seed = 0;
};

/// (1, size, size, 3) image in [-1, 1].
Tensor<float> render_shape(const ShapeParams& p, int size);
/// Fraction of each pixel covered by the shape, (size x size) row-major.
std::vector<float> shape_coverage(const ShapeParams& p, int size);

/// HSV hue in degrees of an RGB triple in [0, 1], and its saturation.
double rgb_hue(double r, double g, double b);
double rgb_saturation(double r, double g, double b);

struct LabeledSample {
  Tensor<float> image;  // (1, H, W, 3)
  DomainLabel label;
  std::optional<ShapeParams> shape;  // set for synthetic samples
};

struct Dataset {
  std::vector<std::string> domains;
  int image_size = 0;
  std::vector<LabeledSample> samples;

  int num_domains() const { return static_cast<int>(domains.size()); }
  Index size() const { return static_cast<Index>(samples.size()); }
  /// Samples with the given label, in dataset order.
  std::vector<const LabeledSample*> of_domain(int label) const;
  int domain_index(const std::string& name) const;  // 1-based; DomainError if unknown
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

DatasetSplit make_synthetic_dataset(const DatasetSpec& spec);

/// Reads root/<domain>/*.{png,jpg,jpeg} in spec domain order, file names
/// sorted, optionally center-cropped, resized to spec.image_size.
Dataset load_folder_dataset(const std::filesystem::path& root, const DatasetSpec& spec);

/// Writes root/<domain>/<index>.png for every sample.
void write_folder_dataset(const Dataset& data, const std::filesystem::path& root);

struct Batch {
  Tensor<float> images;
  std::vector<DomainLabel> labels;
  std::vector<Index> indices;
};

struct IteratorState {
  std::int64_t epoch = 0;
  std::int64_t cursor = 0;
  bool operator==(const IteratorState&) const = default;
};

/// Deterministic epoch-shuffled batches. The permutation of epoch e depends
/// only on (seed, e), so the state is just (epoch, cursor). The final
/// partial batch of each epoch is dropped.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, int batch_size, std::uint64_t seed, bool shuffle = true);

  Batch next();
  Index batches_per_epoch() const { return batches_per_epoch_; }
  IteratorState state() const { return state_; }
  void restore(IteratorState s);

 private:
  void prepare_epoch();

  const Dataset* data_;
  int batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
  Index batches_per_epoch_;
  IteratorState state_;
  std::int64_t prepared_epoch_ = -1;
  std::vector<Index> order_;
};

Batch make_batch(const Dataset& data, std::span<const Index> indices);

/// Uniform targets in 1..num_domains; a target may equal its source.
template <typename Rng>
std::vector<DomainLabel> sample_target_labels(std::span<const DomainLabel> source, int num_domains,
                                              Rng& rng) {
  validate_labels(source, num_domains);
  std::uniform_int_distribution<int> pick(1, num_domains);
  std::vector<DomainLabel> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) out.emplace_back(pick(rng), num_domains);
  return out;
}

}  // namespace sdit

#endif  // SDIT_DATA_HPP
