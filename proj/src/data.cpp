#include "sdit/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sdit/image_io.hpp"

namespace sdit {

namespace {

struct NamedBand {
  const char* name;
  HueBand band;
};

constexpr NamedBand kBands[] = {
    {"green", {90, 150}},  {"yellow", {45, 75}},   {"blue", {200, 260}},
    {"orange", {15, 40}},  {"red", {-10, 10}},     {"cyan", {170, 190}},
    {"purple", {270, 300}}, {"magenta", {310, 330}},
};

double wrap_degrees(double h) {
  h = std::fmod(h, 360.0);
  return h < 0 ? h + 360.0 : h;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = wrap_degrees(h) / 60.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

bool inside(const ShapeParams& p, double u, double v) {
  const double dx = u - p.cx, dy = v - p.cy;
  const double c = std::cos(-p.rotation), s = std::sin(-p.rotation);
  const double x = c * dx - s * dy, y = s * dx + c * dy;
  switch (p.kind) {
    case ShapeKind::circle: return x * x + y * y <= p.radius * p.radius;
    case ShapeKind::square: {
      const double half = p.radius * 0.85;
      return std::abs(x) <= half && std::abs(y) <= half;
    }
    case ShapeKind::triangle: {
      // Equilateral, circumradius p.radius: inside all three edge half-planes.
      for (double deg : {90.0, 210.0, 330.0}) {
        const double a = deg * std::numbers::pi / 180.0;
        if (x * std::cos(a) + y * std::sin(a) > p.radius / 2) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

std::string to_string(DatasetKind k) { return k == DatasetKind::synthetic ? "synthetic" : "folder"; }

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "synthetic") return DatasetKind::synthetic;
  if (s == "folder") return DatasetKind::folder;
  throw ConfigError("unknown dataset kind '" + s + "' (expected synthetic or folder)");
}

void DatasetSpec::validate() const {
  if (domains.size() < 2) throw ConfigError("dataset needs at least 2 domains");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (std::size_t j = i + 1; j < domains.size(); ++j) {
      if (domains[i] == domains[j]) throw ConfigError("duplicate domain '" + domains[i] + "'");
    }
  }
  if (image_size < 1) throw ConfigError("dataset image_size must be >= 1");
  if (kind == DatasetKind::synthetic) {
    if (samples_per_domain < 1) throw ConfigError("samples_per_domain must be >= 1");
    if (test_per_domain < 0) throw ConfigError("test_per_domain must be >= 0");
    for (const auto& d : domains) hue_band(d);
  }
  if ((crop_width > 0) != (crop_height > 0)) {
    throw ConfigError("crop_width and crop_height must be given together");
  }
}

bool HueBand::contains(double hue) const {
  const double h = wrap_degrees(hue);
  const double l = wrap_degrees(lo);
  const double u = wrap_degrees(hi);
  return l <= u ? (h >= l && h <= u) : (h >= l || h <= u);
}

double HueBand::center() const { return wrap_degrees((lo + hi) / 2); }

HueBand hue_band(const std::string& domain) {
  for (const auto& b : kBands) {
    if (domain == b.name) return b.band;
  }
  std::string known;
  for (const auto& n : known_hue_domains()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("domain '" + domain + "' has no hue band (known: " + known + ")");
}

std::vector<std::string> known_hue_domains() {
  std::vector<std::string> out;
  for (const auto& b : kBands) out.emplace_back(b.name);
  return out;
}

double rgb_hue(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  if (d <= 0) return 0;
  double h;
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2;
  } else {
    h = (r - g) / d + 4;
  }
  return wrap_degrees(60 * h);
}

double rgb_saturation(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  return mx <= 0 ? 0 : (mx - mn) / mx;
}

std::vector<float> shape_coverage(const ShapeParams& p, int size) {
  constexpr int kSub = 4;
  std::vector<float> cov(static_cast<std::size_t>(size) * size, 0.f);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double u = (x + (sx + 0.5) / kSub) / size;
          const double v = (y + (sy + 0.5) / kSub) / size;
          hits += inside(p, u, v);
        }
      }
      cov[static_cast<std::size_t>(y) * size + x] = static_cast<float>(hits) / (kSub * kSub);
    }
  }
  return cov;
}

Tensor<float> render_shape(const ShapeParams& p, int size) {
  std::mt19937_64 rng(p.texture_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base = 0.35 + 0.25 * u(rng);
  const double fx = 1 + 3 * u(rng), fy = 1 + 3 * u(rng), phase = 2 * std::numbers::pi * u(rng);
  const auto fill = hsv_to_rgb(p.hue, p.saturation, p.value);
  const std::vector<float> cov = shape_coverage(p, size);

  Tensor<float> img(Shape{1, size, size, 3});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double wave = std::sin(2 * std::numbers::pi * (fx * x + fy * y) / size + phase);
      const double gray = std::clamp(base + 0.06 * wave + 0.06 * (u(rng) - 0.5), 0.0, 1.0);
      const double a = cov[static_cast<std::size_t>(y) * size + x];
      for (int c = 0; c < 3; ++c) {
        const double v = a * fill[c] + (1 - a) * gray;
        img.at(0, y, x, c) = static_cast<float>(2 * v - 1);
      }
    }
  }
  return img;
}

std::vector<const LabeledSample*> Dataset::of_domain(int label) const {
  std::vector<const LabeledSample*> out;
  for (const auto& s : samples) {
    if (s.label.index == label) out.push_back(&s);
  }
  return out;
}

int Dataset::domain_index(const std::string& name) const {
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == name) return static_cast<int>(i) + 1;
  }
  std::string valid;
  for (const auto& d : domains) valid += (valid.empty() ? "" : ", ") + d;
  throw DomainError("unknown domain '" + name + "' (valid: " + valid + ")");
}

DatasetSplit make_synthetic_dataset(const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::synthetic) throw ConfigError("dataset spec is not synthetic");
  spec.validate();
  DatasetSplit split;
  for (Dataset* d : {&split.train, &split.test}) {
    d->domains = spec.domains;
    d->image_size = spec.image_size;
  }
  const int c = spec.num_domains();
  for (int split_id = 0; split_id < 2; ++split_id) {
    Dataset& out = split_id == 0 ? split.train : split.test;
    const int count = split_id == 0 ? spec.samples_per_domain : spec.test_per_domain;
    for (int d = 0; d < c; ++d) {
      std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                        static_cast<std::uint32_t>(split_id), static_cast<std::uint32_t>(d)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const HueBand band = hue_band(spec.domains[static_cast<std::size_t>(d)]);
      for (int i = 0; i < count; ++i) {
        ShapeParams p;
        p.kind = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, 2)(rng));
        p.cx = 0.3 + 0.4 * u(rng);
        p.cy = 0.3 + 0.4 * u(rng);
        p.radius = 0.16 + 0.14 * u(rng);
        p.rotation = 2 * std::numbers::pi * u(rng);
        p.hue = wrap_degrees(band.lo + (band.hi - band.lo) * u(rng));
        p.saturation = 0.65 + 0.35 * u(rng);
        p.value = 0.7 + 0.3 * u(rng);
        p.texture_seed = rng();
        out.samples.push_back({render_shape(p, spec.image_size), DomainLabel(d + 1, c), p});
      }
    }
  }
  return split;
}

Dataset load_folder_dataset(const std::filesystem::path& root, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  spec.validate();
  Dataset out;
  out.domains = spec.domains;
  out.image_size = spec.image_size;
  const int c = spec.num_domains();
  for (int d = 0; d < c; ++d) {
    const fs::path dir = root / spec.domains[static_cast<std::size_t>(d)];
    if (!fs::is_directory(dir)) throw DataError("missing domain directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    if (files.empty()) throw DataError("domain directory " + dir.string() + " has no images");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Tensor<float> img = read_image(f);
      if (spec.crop_width > 0) {
        if (img.shape.w < spec.crop_width || img.shape.h < spec.crop_height) {
          throw DataError("image " + f.string() + " is smaller than the crop window");
        }
        img = center_crop(img, spec.crop_height, spec.crop_width);
      }
      img = resize_bilinear(img, spec.image_size, spec.image_size);
      out.samples.push_back({std::move(img), DomainLabel(d + 1, c), std::nullopt});
    }
  }
  return out;
}

void write_folder_dataset(const Dataset& data, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<int> counters(data.domains.size(), 0);
  for (const auto& name : data.domains) fs::create_directories(root / name);
  for (const auto& s : data.samples) {
    const auto d = static_cast<std::size_t>(s.label.zero_based());
    char file[32];
    std::snprintf(file, sizeof file, "%05d.png", counters[d]++);
    write_image(root / data.domains[d] / file, s.image);
  }
}

Batch make_batch(const Dataset& data, std::span<const Index> indices) {
  Batch b;
  std::vector<Tensor<float>> parts;
  parts.reserve(indices.size());
  for (Index i : indices) {
    const LabeledSample& s = data.samples.at(static_cast<std::size_t>(i));
    parts.push_back(s.image);
    b.labels.push_back(s.label);
  }
  b.images = stack_batch<float>(parts);
  b.indices.assign(indices.begin(), indices.end());
  return b;
}

BatchIterator::BatchIterator(const Dataset& data, int batch_size, std::uint64_t seed, bool shuffle)
    : data_(&data), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (batch_size > data.size()) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(data.size()));
  }
  batches_per_epoch_ = data.size() / batch_size;
}

void BatchIterator::restore(IteratorState s) {
  if (s.epoch < 0 || s.cursor < 0 || s.cursor >= batches_per_epoch_) {
    throw IntegrityError("iterator state out of range");
  }
  state_ = s;
}

void BatchIterator::prepare_epoch() {
  if (prepared_epoch_ == state_.epoch) return;
  order_.resize(static_cast<std::size_t>(data_->size()));
  std::iota(order_.begin(), order_.end(), Index(0));
  if (shuffle_) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(state_.epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
  prepared_epoch_ = state_.epoch;
}

Batch BatchIterator::next() {
  prepare_epoch();
  const auto first = static_cast<std::size_t>(state_.cursor * batch_size_);
  Batch b = make_batch(*data_, std::span<const Index>(order_.data() + first, static_cast<std::size_t>(batch_size_)));
  if (++state_.cursor == batches_per_epoch_) {
    state_.cursor = 0;
    ++state_.epoch;
  }
  return b;
}

}  // namespace sdit
