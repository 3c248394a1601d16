#ifndef SDIT_EVALUATION_HPP
#define SDIT_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdit/adam.hpp"
#include "sdit/data.hpp"
#include "sdit/image_io.hpp"
#include "sdit/model.hpp"
#include "sdit/serialization.hpp"
#include "sdit/training.hpp"

namespace sdit {

/// Maps a batch of inputs to images of `target` domain, one latent row of
/// `z` per input.
struct Translator {
  int latent_dim = 1;
  std::function<Tensor<float>(std::span<const LabeledSample> inputs, DomainLabel target, const Tensor<float>& z)>
      fn;

  Tensor<float> operator()(std::span<const LabeledSample> inputs, DomainLabel target, const Tensor<float>& z) const {
    return fn(inputs, target, z);
  }
};

Translator model_translator(const Model<float>& model, int batch_size = 16);
/// Returns the inputs unchanged.
Translator identity_translator();
/// Re-renders each synthetic input with the target domain's hue; z shifts
/// the hue inside the band. Requires shape parameters on the inputs.
Translator recolor_translator(std::vector<std::string> domains, int image_size);
/// Re-renders each synthetic input with its shape moved by (dx, dy) image fractions.
Translator shift_translator(int image_size, double dx, double dy);
/// Emits `image` for every input, target and latent code.
Translator collapsed_translator(Tensor<float> image);

struct Embedder {
  std::string provenance;  // raw-pixel | shape-mask | reverse-classifier-penultimate
  Index dim = 0;
  std::function<RowMatrix<float>(const Tensor<float>& images)> embed;  // one row per image
};

/// Root-mean-square difference of embeddings: ||u - v|| / sqrt(dim).
double embedding_distance(const Eigen::Ref<const RowMatrix<float>>& u, const Eigen::Ref<const RowMatrix<float>>& v);

Embedder raw_pixel_embedder(int image_size);
/// Per-pixel indicator of saturation above `threshold` (background is gray).
Embedder shape_mask_embedder(int image_size, float threshold = 0.25f);

struct ClassifierConfig {
  int epochs = 5;
  int batch_size = 16;
  double learning_rate = 1e-3;
  int base_channels = 16;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ClassifierConfig&) const = default;
};

/// Three stride-2 convolution blocks, global average pooling and a linear
/// head (zero-initialized). Trained on class-balanced batches. The pooled
/// features are the penultimate embedding.
class DomainClassifier {
 public:
  DomainClassifier(int image_size, int num_domains, const ClassifierConfig& cfg);

  /// Trains from scratch with a fixed seed. Throws NumericError if the loss
  /// stops being finite.
  void fit(const Tensor<float>& images, std::span<const DomainLabel> labels);

  RowMatrix<float> logits(const Tensor<float>& images) const;
  RowMatrix<float> features(const Tensor<float>& images) const;
  /// 1-based. Logits within 1e-2 of the maximum are tied and the lowest
  /// domain wins, so a classifier that learned nothing predicts one class.
  std::vector<int> predict(const Tensor<float>& images) const;
  int image_size() const { return image_size_; }
  int num_domains() const { return num_domains_; }
  Index feature_dim() const { return 4 * cfg_.base_channels; }

 private:
  Var<float> trunk(Graph<float>& g, Var<float> x) const;

  int image_size_;
  int num_domains_;
  ClassifierConfig cfg_;
  std::vector<ConvLayer<float>> convs_;
  LinearLayer<float> head_;
};

Embedder classifier_embedder(std::shared_ptr<const DomainClassifier> classifier);

struct DiversityResult {
  double score = 0;
  bool degenerate_embedder = false;
  std::vector<double> per_input;
};

/// Mean pairwise embedding distance among n_samples translations of each
/// input (one shared latent set for all inputs), averaged over inputs.
DiversityResult diversity_score(const Translator& translate, std::span<const LabeledSample> inputs,
                                DomainLabel target, int n_samples, const Embedder& embedder,
                                std::uint64_t seed);
/// Same translations scored under several embedders.
std::vector<DiversityResult> diversity_scores(const Translator& translate, std::span<const LabeledSample> inputs,
                                              DomainLabel target, int n_samples,
                                              std::span<const Embedder* const> embedders, std::uint64_t seed);

struct ReverseClassificationResult {
  std::vector<double> per_domain;
  double mean = 0;
  double train_accuracy = 0;
};

/// Translates every training input into every domain with random z, fits a
/// fresh classifier on the translations and scores it on real test images.
ReverseClassificationResult reverse_classification(const Translator& translate,
                                                   std::span<const LabeledSample> train_inputs,
                                                   const Dataset& test_set, const ClassifierConfig& cfg,
                                                   std::uint64_t seed);

/// Accuracy of the same classifier trained directly on real images.
ReverseClassificationResult real_data_ceiling(const Dataset& train_set, const Dataset& test_set,
                                              const ClassifierConfig& cfg);

/// Mean embedding distance between each input and its translation into
/// `target` (random z).
double content_distance(const Translator& translate, std::span<const LabeledSample> inputs, DomainLabel target,
                        const Embedder& embedder, std::uint64_t seed);

struct EvalConfig {
  int n_samples = 10;
  int inputs_per_domain = 200;   // test inputs used for diversity and content distance
  int reverse_train_per_domain = 200;  // training inputs translated for reverse classification
  std::string embedder = "classifier";  // classifier | raw_pixel | shape_mask
  ClassifierConfig classifier;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

Json to_json(const EvalConfig& c);
void read_json(const Json& j, EvalConfig& c, const std::string& section = "eval");

struct EvalReport {
  std::vector<std::string> domains;
  std::vector<double> diversity;  // per target domain
  double mean_diversity = 0;
  std::vector<double> raw_pixel_diversity;
  double mean_raw_pixel_diversity = 0;
  std::vector<double> accuracy;  // per domain, reverse classification
  double mean_accuracy = 0;
  double content_distance = 0;
  std::string content_embedder;
  std::string embedder;
  bool degenerate_embedder = false;
  std::string fingerprint;
  std::int64_t iteration = 0;
  std::vector<std::string> grids;
};

Json to_json(const EvalReport& r);

/// Picks up to `per_domain` samples of each domain, in dataset order.
std::vector<LabeledSample> take_per_domain(const Dataset& data, int per_domain);

/// Real-data classifier used by the default embedder.
std::shared_ptr<const DomainClassifier> train_embedding_classifier(const Dataset& train_set,
                                                                   const ClassifierConfig& cfg);

Embedder make_embedder(const std::string& name, int image_size,
                       const std::shared_ptr<const DomainClassifier>& classifier);

/// All metrics for one translator.
EvalReport evaluate(const Translator& translate, const Dataset& train_set, const Dataset& test_set,
                    const EvalConfig& cfg, const Embedder& embedder);

struct AblationVariant {
  std::string name;
  Checkpoint checkpoint;
};

struct AblationReport {
  std::vector<std::string> names;
  std::vector<EvalReport> reports;
  std::string grid;
};

Json to_json(const AblationReport& r);

/// Differences between two variants outside the ablation switches
/// (attention, CIN and its gamma/beta learnability, latent weight); empty
/// when compatible.
std::vector<std::string> incompatible_settings(const Checkpoint& a, const Checkpoint& b);

/// Evaluates every variant and writes a comparison grid into `out_dir`
/// (rows = variants per probe input, columns = latent samples). Throws
/// ConfigError listing the differing settings when variants are not
/// comparable.
AblationReport ablation_report(const std::vector<AblationVariant>& variants, const Dataset& train_set,
                               const Dataset& test_set, const EvalConfig& cfg,
                               const std::filesystem::path& out_dir);

/// Rows = inputs, columns = n_samples latent draws (seeded).
Raster translation_grid(const Translator& translate, std::span<const LabeledSample> inputs, DomainLabel target,
                        int n_samples, std::uint64_t seed, int latent_dim, const std::string& header = "");

}  // namespace sdit

#endif  // SDIT_EVALUATION_HPP
