#include "sdit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdit {

namespace {

constexpr Index kEvalChunk = 64;
// Logits this close to the maximum are ties, resolved to the lowest domain.
constexpr float kTieTolerance = 1e-2f;

Tensor<float> stack_images(std::span<const LabeledSample> inputs) {
  std::vector<Tensor<float>> parts;
  parts.reserve(inputs.size());
  for (const auto& s : inputs) parts.push_back(s.image);
  return stack_batch<float>(parts);
}

const ShapeParams& require_shape(const LabeledSample& s) {
  if (!s.shape) throw DomainError("procedural translator needs synthetic inputs with shape parameters");
  return *s.shape;
}

double standard_normal_cdf(double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); }

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

/// Applies `fn` to chunks of `images` and stacks the row blocks.
template <typename F>
RowMatrix<float> chunked_rows(const Tensor<float>& images, Index cols, F&& fn) {
  RowMatrix<float> out(images.shape.n, cols);
  for (Index first = 0; first < images.shape.n; first += kEvalChunk) {
    const Index count = std::min(kEvalChunk, images.shape.n - first);
    out.middleRows(first, count) = fn(images.slice_batch(first, count));
  }
  return out;
}

}  // namespace

Translator model_translator(const Model<float>& model, int batch_size) {
  const Model<float>* m = &model;
  return {model.config.latent_dim,
          [m, batch_size](std::span<const LabeledSample> inputs, DomainLabel target, const Tensor<float>& z) {
            std::vector<Tensor<float>> outs;
            const auto n = static_cast<Index>(inputs.size());
            for (Index first = 0; first < n; first += batch_size) {
              const Index count = std::min<Index>(batch_size, n - first);
              const auto part = inputs.subspan(static_cast<std::size_t>(first), static_cast<std::size_t>(count));
              const std::vector<DomainLabel> labels(static_cast<std::size_t>(count), target);
              outs.push_back(generate(*m, stack_images(part), labels, z.slice_batch(first, count)));
            }
            return stack_batch<float>(outs);
          }};
}

Translator identity_translator() {
  return {1, [](std::span<const LabeledSample> inputs, DomainLabel, const Tensor<float>&) {
            return stack_images(inputs);
          }};
}

Translator recolor_translator(std::vector<std::string> domains, int image_size) {
  return {1, [domains = std::move(domains), image_size](std::span<const LabeledSample> inputs, DomainLabel target,
                                                        const Tensor<float>& z) {
            const HueBand band = hue_band(domains.at(static_cast<std::size_t>(target.zero_based())));
            std::vector<Tensor<float>> outs;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
              ShapeParams p = require_shape(inputs[i]);
              const double u = standard_normal_cdf(z.data(static_cast<Index>(i), 0));
              p.hue = band.lo + (band.hi - band.lo) * u;
              if (p.hue < 0) p.hue += 360;
              outs.push_back(render_shape(p, image_size));
            }
            return stack_batch<float>(outs);
          }};
}

Translator shift_translator(int image_size, double dx, double dy) {
  return {1, [image_size, dx, dy](std::span<const LabeledSample> inputs, DomainLabel, const Tensor<float>&) {
            std::vector<Tensor<float>> outs;
            for (const auto& s : inputs) {
              ShapeParams p = require_shape(s);
              p.cx += dx;
              p.cy += dy;
              outs.push_back(render_shape(p, image_size));
            }
            return stack_batch<float>(outs);
          }};
}

Translator collapsed_translator(Tensor<float> image) {
  return {1, [image = std::move(image)](std::span<const LabeledSample> inputs, DomainLabel, const Tensor<float>&) {
            std::vector<Tensor<float>> outs(inputs.size(), image);
            return stack_batch<float>(outs);
          }};
}

double embedding_distance(const Eigen::Ref<const RowMatrix<float>>& u, const Eigen::Ref<const RowMatrix<float>>& v) {
  if (u.size() != v.size() || u.size() == 0) throw DomainError("embedding_distance: dimension mismatch");
  const double sq = (u.cast<double>() - v.cast<double>()).squaredNorm();
  return std::sqrt(sq / static_cast<double>(u.size()));
}

Embedder raw_pixel_embedder(int image_size) {
  const Index dim = static_cast<Index>(image_size) * image_size * 3;
  return {"raw-pixel", dim, [image_size, dim](const Tensor<float>& images) {
            if (images.shape.h != image_size || images.shape.w != image_size || images.shape.c != 3) {
              throw DomainError("raw-pixel embedder: unexpected image shape " + to_string(images.shape));
            }
            return RowMatrix<float>(Eigen::Map<const RowMatrix<float>>(images.ptr(), images.shape.n, dim));
          }};
}

Embedder shape_mask_embedder(int image_size, float threshold) {
  const Index pixels = static_cast<Index>(image_size) * image_size;
  return {"shape-mask", pixels, [pixels, threshold](const Tensor<float>& images) {
            if (images.shape.h * images.shape.w != pixels) {
              throw DomainError("shape-mask embedder: unexpected image shape " + to_string(images.shape));
            }
            RowMatrix<float> out(images.shape.n, pixels);
            for (Index n = 0; n < images.shape.n; ++n) {
              auto rows = images.sample_rows(n);
              for (Index p = 0; p < pixels; ++p) {
                const double r = (rows(p, 0) + 1) / 2, g = (rows(p, 1) + 1) / 2, b = (rows(p, 2) + 1) / 2;
                out(n, p) = rgb_saturation(r, g, b) > threshold ? 1.f : 0.f;
              }
            }
            return out;
          }};
}

void ClassifierConfig::validate() const {
  if (epochs < 1) throw ConfigError("classifier: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("classifier: learning_rate must be > 0");
  if (base_channels < 1) throw ConfigError("classifier: base_channels must be >= 1");
}

DomainClassifier::DomainClassifier(int image_size, int num_domains, const ClassifierConfig& cfg)
    : image_size_(image_size), num_domains_(num_domains), cfg_(cfg) {
  cfg.validate();
  if (image_size % 8 != 0) throw ConfigError("classifier: image size must be divisible by 8");
  if (num_domains < 1) throw ConfigError("classifier: num_domains must be >= 1");
  std::mt19937_64 rng = seeded(cfg.seed, 0);
  auto init = [&](Parameter<float>& p, double fan_in) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (Index i = 0; i < p.value.size(); ++i) p.value.flat()(i) = static_cast<float>(normal(rng));
  };
  const ParamGroup grp = ParamGroup::classifier;
  int in = 3;
  for (int i = 0; i < 3; ++i) {
    const int out = cfg.base_channels << i;
    ConvLayer<float> c;
    c.weight = Parameter<float>("classifier.conv" + std::to_string(i) + ".weight", grp, Shape{1, 1, 16 * in, out});
    c.bias = Parameter<float>("classifier.conv" + std::to_string(i) + ".bias", grp, Shape{1, 1, 1, out});
    c.geom = ConvGeometry{4, 2, 1};
    init(c.weight, 16.0 * in);
    convs_.push_back(std::move(c));
    in = out;
  }
  head_ = {Parameter<float>("classifier.head.weight", grp, Shape{1, 1, in, num_domains}),
           Parameter<float>("classifier.head.bias", grp, Shape{1, 1, 1, num_domains})};
}

Var<float> DomainClassifier::trunk(Graph<float>& g, Var<float> x) const {
  (void)g;
  for (const auto& c : convs_) x = leaky_relu(apply(c, x), 0.2f);
  return mean_spatial(x);
}

void DomainClassifier::fit(const Tensor<float>& images, std::span<const DomainLabel> labels) {
  if (images.shape.n != static_cast<Index>(labels.size())) throw DomainError("classifier: one label per image");
  if (images.shape.h != image_size_ || images.shape.w != image_size_) {
    throw DomainError("classifier: expected " + std::to_string(image_size_) + " pixel images");
  }
  validate_labels(labels, num_domains_);
  std::vector<Parameter<float>*> params;
  for (auto& c : convs_) {
    params.push_back(&c.weight);
    params.push_back(&*c.bias);
  }
  params.push_back(&head_.weight);
  params.push_back(&head_.bias);
  Adam<float> opt(params, AdamConfig{cfg_.learning_rate, 0.9, 0.999, 1e-6});

  // Class-balanced batches: per_class draws of every domain, smaller
  // domains wrap around.
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(num_domains_));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i].zero_based())].push_back(static_cast<Index>(i));
  }
  std::size_t largest = 0;
  for (auto& members : by_class) {
    if (members.empty()) throw DataError("classifier: no training images for one of the domains");
    largest = std::max(largest, members.size());
  }
  const std::size_t per_class = std::max(1, cfg_.batch_size / num_domains_);
  const std::size_t batches = std::max<std::size_t>(1, largest / per_class);
  std::mt19937_64 rng = seeded(cfg_.seed, 1);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<Tensor<float>> parts;
      std::vector<DomainLabel> batch_labels;
      for (std::size_t k = 0; k < per_class; ++k) {
        for (const auto& members : by_class) {
          const Index idx = members[(b * per_class + k) % members.size()];
          parts.push_back(images.slice_batch(idx, 1));
          batch_labels.push_back(labels[static_cast<std::size_t>(idx)]);
        }
      }
      opt.zero_grad();
      Graph<float> g(static_cast<unsigned>(ParamGroup::classifier));
      Var<float> logits = apply(head_, trunk(g, g.constant(stack_batch<float>(parts))));
      Var<float> loss = classification_loss(logits, batch_labels);
      const double value = scalar_value(loss);
      if (!std::isfinite(value)) {
        throw NumericError("classifier training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(b + 1) + " (loss " + std::to_string(value) + ")");
      }
      g.backward(loss);
      opt.step();
    }
  }
}

RowMatrix<float> DomainClassifier::features(const Tensor<float>& images) const {
  return chunked_rows(images, feature_dim(), [&](const Tensor<float>& part) {
    Graph<float> g(groups_none);
    return trunk(g, g.constant(part)).value().data;
  });
}

RowMatrix<float> DomainClassifier::logits(const Tensor<float>& images) const {
  return chunked_rows(images, num_domains_, [&](const Tensor<float>& part) {
    Graph<float> g(groups_none);
    return apply(head_, trunk(g, g.constant(part))).value().data;
  });
}

std::vector<int> DomainClassifier::predict(const Tensor<float>& images) const {
  const RowMatrix<float> l = logits(images);
  std::vector<int> out(static_cast<std::size_t>(l.rows()));
  for (Index i = 0; i < l.rows(); ++i) {
    const float top = l.row(i).maxCoeff();
    Index best = 0;
    while (l(i, best) < top - kTieTolerance) ++best;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return out;
}

Embedder classifier_embedder(std::shared_ptr<const DomainClassifier> classifier) {
  const Index dim = classifier->feature_dim();
  return {"reverse-classifier-penultimate", dim,
          [c = std::move(classifier)](const Tensor<float>& images) { return c->features(images); }};
}

std::vector<DiversityResult> diversity_scores(const Translator& translate, std::span<const LabeledSample> inputs,
                                              DomainLabel target, int n_samples,
                                              std::span<const Embedder* const> embedders, std::uint64_t seed) {
  if (n_samples < 2) throw ConfigError("diversity needs n_samples >= 2");
  if (inputs.empty()) throw DomainError("diversity needs at least one input");
  const auto n = static_cast<Index>(inputs.size());
  std::mt19937_64 rng = seeded(seed, 2);
  const Tensor<float> zset = sample_latent<float>(n_samples, translate.latent_dim, rng);

  // outputs[k] holds the translations of every input under latent row k.
  std::vector<Tensor<float>> outputs;
  for (int k = 0; k < n_samples; ++k) {
    Tensor<float> z(Shape{n, 1, 1, translate.latent_dim});
    z.data.rowwise() = zset.data.row(k);
    outputs.push_back(translate(inputs, target, z));
  }

  const Tensor<float> input_images = stack_images(inputs);
  std::vector<DiversityResult> results;
  for (const Embedder* e : embedders) {
    DiversityResult r;
    std::vector<RowMatrix<float>> emb;
    for (const auto& o : outputs) emb.push_back(e->embed(o));

    // A constant embedder maps distinct images to one point.
    const RowMatrix<float> probe = e->embed(input_images);
    bool images_differ = false, embeddings_differ = false;
    for (Index i = 0; i < n; ++i) {
      images_differ = images_differ || input_images.sample_rows(i) != input_images.sample_rows(0);
      embeddings_differ = embeddings_differ || probe.row(i) != probe.row(0);
      for (std::size_t k = 0; k < outputs.size(); ++k) {
        images_differ = images_differ || outputs[k].sample_rows(i) != input_images.sample_rows(0);
        embeddings_differ = embeddings_differ || emb[k].row(i) != probe.row(0);
      }
    }
    if (images_differ && !embeddings_differ) {
      r.degenerate_embedder = true;
      r.per_input.assign(static_cast<std::size_t>(n), 0.0);
      results.push_back(std::move(r));
      continue;
    }

    double total = 0;
    for (Index i = 0; i < n; ++i) {
      double sum = 0;
      int pairs = 0;
      for (int a = 0; a < n_samples; ++a) {
        for (int b = a + 1; b < n_samples; ++b) {
          sum += embedding_distance(emb[static_cast<std::size_t>(a)].row(i), emb[static_cast<std::size_t>(b)].row(i));
          ++pairs;
        }
      }
      r.per_input.push_back(sum / pairs);
      total += sum / pairs;
    }
    r.score = total / static_cast<double>(n);
    results.push_back(std::move(r));
  }
  return results;
}

DiversityResult diversity_score(const Translator& translate, std::span<const LabeledSample> inputs,
                                DomainLabel target, int n_samples, const Embedder& embedder,
                                std::uint64_t seed) {
  const Embedder* e[] = {&embedder};
  return diversity_scores(translate, inputs, target, n_samples, e, seed).front();
}

namespace {

ReverseClassificationResult score_classifier(const DomainClassifier& clf, const Dataset& test_set) {
  const int c = test_set.num_domains();
  std::vector<Tensor<float>> parts;
  for (const auto& s : test_set.samples) parts.push_back(s.image);
  if (parts.empty()) throw DataError("reverse classification needs a non-empty test set");
  const std::vector<int> pred = clf.predict(stack_batch<float>(parts));
  std::vector<int> hits(static_cast<std::size_t>(c), 0), counts(static_cast<std::size_t>(c), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto d = static_cast<std::size_t>(test_set.samples[i].label.zero_based());
    ++counts[d];
    hits[d] += pred[i] == test_set.samples[i].label.index;
  }
  ReverseClassificationResult r;
  for (int d = 0; d < c; ++d) {
    if (counts[static_cast<std::size_t>(d)] == 0) {
      throw DataError("test set has no samples of domain " + test_set.domains[static_cast<std::size_t>(d)]);
    }
    r.per_domain.push_back(static_cast<double>(hits[static_cast<std::size_t>(d)]) / counts[static_cast<std::size_t>(d)]);
  }
  r.mean = std::accumulate(r.per_domain.begin(), r.per_domain.end(), 0.0) / c;
  return r;
}

double training_accuracy(const DomainClassifier& clf, const Tensor<float>& images,
                         std::span<const DomainLabel> labels) {
  const std::vector<int> pred = clf.predict(images);
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i].index;
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

ReverseClassificationResult reverse_classification(const Translator& translate,
                                                   std::span<const LabeledSample> train_inputs,
                                                   const Dataset& test_set, const ClassifierConfig& cfg,
                                                   std::uint64_t seed) {
  if (train_inputs.empty()) throw DataError("reverse classification needs training inputs");
  const int c = test_set.num_domains();
  const auto n = static_cast<Index>(train_inputs.size());
  std::mt19937_64 rng = seeded(seed, 3);
  std::vector<Tensor<float>> parts;
  std::vector<DomainLabel> labels;
  for (int d = 1; d <= c; ++d) {
    const Tensor<float> z = sample_latent<float>(n, translate.latent_dim, rng);
    parts.push_back(translate(train_inputs, DomainLabel(d, c), z));
    labels.insert(labels.end(), static_cast<std::size_t>(n), DomainLabel(d, c));
  }
  const Tensor<float> images = stack_batch<float>(parts);
  DomainClassifier clf(test_set.image_size, c, cfg);
  clf.fit(images, labels);
  ReverseClassificationResult r = score_classifier(clf, test_set);
  r.train_accuracy = training_accuracy(clf, images, labels);
  return r;
}

ReverseClassificationResult real_data_ceiling(const Dataset& train_set, const Dataset& test_set,
                                              const ClassifierConfig& cfg) {
  std::vector<Tensor<float>> parts;
  std::vector<DomainLabel> labels;
  for (const auto& s : train_set.samples) {
    parts.push_back(s.image);
    labels.push_back(s.label);
  }
  const Tensor<float> images = stack_batch<float>(parts);
  DomainClassifier clf(train_set.image_size, train_set.num_domains(), cfg);
  clf.fit(images, labels);
  ReverseClassificationResult r = score_classifier(clf, test_set);
  r.train_accuracy = training_accuracy(clf, images, labels);
  return r;
}

double content_distance(const Translator& translate, std::span<const LabeledSample> inputs, DomainLabel target,
                        const Embedder& embedder, std::uint64_t seed) {
  if (inputs.empty()) throw DomainError("content distance needs at least one input");
  const auto n = static_cast<Index>(inputs.size());
  std::mt19937_64 rng = seeded(seed, 4);
  const Tensor<float> z = sample_latent<float>(n, translate.latent_dim, rng);
  const RowMatrix<float> before = embedder.embed(stack_images(inputs));
  const RowMatrix<float> after = embedder.embed(translate(inputs, target, z));
  double total = 0;
  for (Index i = 0; i < n; ++i) total += embedding_distance(before.row(i), after.row(i));
  return total / static_cast<double>(n);
}

void EvalConfig::validate() const {
  if (n_samples < 2) throw ConfigError("eval: n_samples must be >= 2");
  if (inputs_per_domain < 1) throw ConfigError("eval: inputs_per_domain must be >= 1");
  if (reverse_train_per_domain < 1) throw ConfigError("eval: reverse_train_per_domain must be >= 1");
  if (embedder != "classifier" && embedder != "raw_pixel" && embedder != "shape_mask") {
    throw ConfigError("eval: unknown embedder '" + embedder + "' (classifier, raw_pixel, shape_mask)");
  }
  classifier.validate();
}

Json to_json(const EvalConfig& c) {
  return Json{{"n_samples", c.n_samples},
              {"inputs_per_domain", c.inputs_per_domain},
              {"reverse_train_per_domain", c.reverse_train_per_domain},
              {"embedder", c.embedder},
              {"classifier",
               {{"epochs", c.classifier.epochs},
                {"batch_size", c.classifier.batch_size},
                {"learning_rate", c.classifier.learning_rate},
                {"base_channels", c.classifier.base_channels},
                {"seed", c.classifier.seed}}},
              {"seed", c.seed}};
}

void read_json(const Json& j, EvalConfig& c, const std::string& section) {
  using detail::read_key;
  detail::reject_unknown_keys(
      j, {"n_samples", "inputs_per_domain", "reverse_train_per_domain", "embedder", "classifier", "seed"}, section);
  read_key(j, "n_samples", c.n_samples, section);
  read_key(j, "inputs_per_domain", c.inputs_per_domain, section);
  read_key(j, "reverse_train_per_domain", c.reverse_train_per_domain, section);
  read_key(j, "embedder", c.embedder, section);
  read_key(j, "seed", c.seed, section);
  if (j.contains("classifier")) {
    const Json& k = j.at("classifier");
    const std::string sub = section + ".classifier";
    detail::reject_unknown_keys(k, {"epochs", "batch_size", "learning_rate", "base_channels", "seed"}, sub);
    read_key(k, "epochs", c.classifier.epochs, sub);
    read_key(k, "batch_size", c.classifier.batch_size, sub);
    read_key(k, "learning_rate", c.classifier.learning_rate, sub);
    read_key(k, "base_channels", c.classifier.base_channels, sub);
    read_key(k, "seed", c.classifier.seed, sub);
  }
}

Json to_json(const EvalReport& r) {
  Json diversity = Json::object(), raw = Json::object(), accuracy = Json::object();
  for (std::size_t d = 0; d < r.domains.size(); ++d) {
    if (d < r.diversity.size()) diversity[r.domains[d]] = r.diversity[d];
    if (d < r.raw_pixel_diversity.size()) raw[r.domains[d]] = r.raw_pixel_diversity[d];
    if (d < r.accuracy.size()) accuracy[r.domains[d]] = r.accuracy[d];
  }
  diversity["mean"] = r.mean_diversity;
  raw["mean"] = r.mean_raw_pixel_diversity;
  accuracy["mean"] = r.mean_accuracy;
  return Json{{"fingerprint", r.fingerprint},
              {"iteration", r.iteration},
              {"domains", r.domains},
              {"reverse_classification_accuracy", accuracy},
              {"diversity", diversity},
              {"diversity_embedder", r.embedder},
              {"degenerate_embedder", r.degenerate_embedder},
              {"raw_pixel_diversity", raw},
              {"content_distance", r.content_distance},
              {"content_embedder", r.content_embedder},
              {"grids", r.grids}};
}

std::vector<LabeledSample> take_per_domain(const Dataset& data, int per_domain) {
  std::vector<LabeledSample> out;
  for (int d = 1; d <= data.num_domains(); ++d) {
    int taken = 0;
    for (const LabeledSample* s : data.of_domain(d)) {
      if (taken++ == per_domain) break;
      out.push_back(*s);
    }
  }
  return out;
}

std::shared_ptr<const DomainClassifier> train_embedding_classifier(const Dataset& train_set,
                                                                   const ClassifierConfig& cfg) {
  auto clf = std::make_shared<DomainClassifier>(train_set.image_size, train_set.num_domains(), cfg);
  std::vector<Tensor<float>> parts;
  std::vector<DomainLabel> labels;
  for (const auto& s : train_set.samples) {
    parts.push_back(s.image);
    labels.push_back(s.label);
  }
  clf->fit(stack_batch<float>(parts), labels);
  return clf;
}

Embedder make_embedder(const std::string& name, int image_size,
                       const std::shared_ptr<const DomainClassifier>& classifier) {
  if (name == "raw_pixel") return raw_pixel_embedder(image_size);
  if (name == "shape_mask") return shape_mask_embedder(image_size);
  if (name == "classifier") {
    if (!classifier) throw ConfigError("classifier embedder requested without a trained classifier");
    return classifier_embedder(classifier);
  }
  throw ConfigError("unknown embedder '" + name + "'");
}

EvalReport evaluate(const Translator& translate, const Dataset& train_set, const Dataset& test_set,
                    const EvalConfig& cfg, const Embedder& embedder) {
  cfg.validate();
  const int c = test_set.num_domains();
  const std::vector<LabeledSample> inputs = take_per_domain(test_set, cfg.inputs_per_domain);
  const Embedder raw = raw_pixel_embedder(test_set.image_size);
  const Embedder* embedders[] = {&embedder, &raw};

  const bool synthetic = std::all_of(inputs.begin(), inputs.end(), [](const auto& s) { return s.shape.has_value(); });
  const Embedder content = synthetic ? shape_mask_embedder(test_set.image_size) : embedder;

  EvalReport r;
  r.domains = test_set.domains;
  r.embedder = embedder.provenance;
  r.content_embedder = synthetic ? content.provenance : content.provenance + " (proxy)";
  double content_total = 0;
  for (int d = 1; d <= c; ++d) {
    const DomainLabel target(d, c);
    auto scores = diversity_scores(translate, inputs, target, cfg.n_samples, embedders, cfg.seed + static_cast<std::uint64_t>(d));
    r.diversity.push_back(scores[0].score);
    r.raw_pixel_diversity.push_back(scores[1].score);
    r.degenerate_embedder = r.degenerate_embedder || scores[0].degenerate_embedder;
    content_total += content_distance(translate, inputs, target, content, cfg.seed + static_cast<std::uint64_t>(d));
  }
  r.mean_diversity = std::accumulate(r.diversity.begin(), r.diversity.end(), 0.0) / c;
  r.mean_raw_pixel_diversity = std::accumulate(r.raw_pixel_diversity.begin(), r.raw_pixel_diversity.end(), 0.0) / c;
  r.content_distance = content_total / c;

  const std::vector<LabeledSample> train_inputs = take_per_domain(train_set, cfg.reverse_train_per_domain);
  const ReverseClassificationResult rc = reverse_classification(translate, train_inputs, test_set, cfg.classifier, cfg.seed);
  r.accuracy = rc.per_domain;
  r.mean_accuracy = rc.mean;
  return r;
}

Json to_json(const AblationReport& r) {
  Json variants = Json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    Json v = to_json(r.reports[i]);
    v["name"] = r.names[i];
    variants.push_back(v);
  }
  return Json{{"variants", variants}, {"grid", r.grid}};
}

std::vector<std::string> incompatible_settings(const Checkpoint& a, const Checkpoint& b) {
  auto neutral = [](const Checkpoint& c) {
    Json m = to_json(c.model_config);
    for (const char* k : {"attention_enabled", "cin_enabled", "cin_gamma_learnable", "cin_beta_learnable"}) m.erase(k);
    Json t = to_json(c.train_config);
    t["weights"].erase("latent");
    return Json{{"model", m}, {"train", t}, {"domains", c.domains}};
  };
  const Json ja = neutral(a), jb = neutral(b);
  std::vector<std::string> diffs;
  for (const auto& section : ja.items()) {
    const Json& sa = section.value();
    const Json& sb = jb.at(section.key());
    if (!sa.is_object()) {
      if (sa != sb) diffs.push_back(section.key() + ": " + sa.dump() + " vs " + sb.dump());
      continue;
    }
    for (const auto& item : sa.items()) {
      const Json& other = sb.contains(item.key()) ? sb.at(item.key()) : Json();
      if (item.value() != other) {
        diffs.push_back(section.key() + "." + item.key() + ": " + item.value().dump() + " vs " + other.dump());
      }
    }
  }
  return diffs;
}

Raster translation_grid(const Translator& translate, std::span<const LabeledSample> inputs, DomainLabel target,
                        int n_samples, std::uint64_t seed, int latent_dim, const std::string& header) {
  std::mt19937_64 rng = seeded(seed, 5);
  const Tensor<float> zset = sample_latent<float>(n_samples, latent_dim, rng);
  std::vector<std::vector<Tensor<float>>> cells(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) cells[i].push_back(inputs[i].image);
  for (int k = 0; k < n_samples; ++k) {
    Tensor<float> z(Shape{static_cast<Index>(inputs.size()), 1, 1, latent_dim});
    z.data.rowwise() = zset.data.row(k);
    const Tensor<float> out = translate(inputs, target, z);
    for (std::size_t i = 0; i < inputs.size(); ++i) cells[i].push_back(out.slice_batch(static_cast<Index>(i), 1));
  }
  std::vector<std::string> headers{header.empty() ? "input" : header};
  for (int k = 0; k < n_samples; ++k) headers.push_back("z" + std::to_string(k + 1));
  return compose_grid(cells, headers, {});
}

AblationReport ablation_report(const std::vector<AblationVariant>& variants, const Dataset& train_set,
                               const Dataset& test_set, const EvalConfig& cfg,
                               const std::filesystem::path& out_dir) {
  if (variants.empty()) throw ConfigError("ablation report needs at least one variant");
  for (std::size_t i = 1; i < variants.size(); ++i) {
    const auto diffs = incompatible_settings(variants[0].checkpoint, variants[i].checkpoint);
    if (!diffs.empty()) {
      std::string msg = "variants '" + variants[0].name + "' and '" + variants[i].name + "' are not comparable:";
      for (const auto& d : diffs) msg += "\n  " + d;
      throw ConfigError(msg);
    }
  }

  std::shared_ptr<const DomainClassifier> classifier;
  if (cfg.embedder == "classifier") classifier = train_embedding_classifier(train_set, cfg.classifier);
  const Embedder embedder = make_embedder(cfg.embedder, test_set.image_size, classifier);

  AblationReport report;
  std::vector<Model<float>> models;
  models.reserve(variants.size());
  for (const auto& v : variants) {
    models.push_back(restore_model(v.checkpoint));
    report.names.push_back(v.name);
    EvalReport r = evaluate(model_translator(models.back()), train_set, test_set, cfg, embedder);
    r.iteration = v.checkpoint.iteration;
    r.fingerprint = fingerprint(Json{{"model", to_json(v.checkpoint.model_config)},
                                     {"train", to_json(v.checkpoint.train_config)}});
    report.reports.push_back(std::move(r));
  }

  // Per probe input: one row per variant, columns = latent samples.
  const int c = test_set.num_domains();
  const int columns = std::min(cfg.n_samples, 6);
  std::mt19937_64 rng = seeded(cfg.seed, 6);
  const int latent_dim = variants[0].checkpoint.model_config.latent_dim;
  const Tensor<float> zset = sample_latent<float>(columns, latent_dim, rng);
  std::vector<std::vector<Tensor<float>>> cells;
  std::vector<std::string> labels;
  for (int d = 1; d <= std::min(c, 4); ++d) {
    const auto of = test_set.of_domain(d);
    if (of.empty()) continue;
    const LabeledSample& probe = *of.front();
    const DomainLabel target(d % c + 1, c);
    for (std::size_t v = 0; v < models.size(); ++v) {
      std::vector<Tensor<float>> row{probe.image};
      for (int k = 0; k < columns; ++k) {
        Tensor<float> z(Shape{1, 1, 1, latent_dim});
        z.data.row(0) = zset.data.row(k);
        row.push_back(generate(models[v], probe.image, std::vector<DomainLabel>{target}, z));
      }
      cells.push_back(std::move(row));
      labels.push_back(variants[v].name);
    }
  }
  std::vector<std::string> headers{"input"};
  for (int k = 0; k < columns; ++k) headers.push_back("z" + std::to_string(k + 1));
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path grid = out_dir / ("ablation_" + report.reports[0].fingerprint + ".png");
  write_png(grid, compose_grid(cells, headers, labels));
  report.grid = grid.string();
  for (auto& r : report.reports) r.grids.push_back(report.grid);
  return report;
}

}  // namespace sdit
