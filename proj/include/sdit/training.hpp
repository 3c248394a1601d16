#ifndef SDIT_TRAINING_HPP
#define SDIT_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sdit/adam.hpp"
#include "sdit/data.hpp"
#include "sdit/model.hpp"
#include "sdit/serialization.hpp"

namespace sdit {

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 4;
  std::int64_t total_iterations = 20000;
  int d_steps_per_g_step = 1;
  LossWeights weights;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 1000;  // 0 = final checkpoint only
  std::int64_t log_every = 10;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, 1e-8}; }
  bool operator==(const TrainConfig&) const = default;
};

Json to_json(const TrainConfig& c);
void read_json(const Json& j, TrainConfig& c, const std::string& section = "train");

struct TrainLogRecord {
  std::int64_t iteration = 0;
  LossBundle d;  // last D step: gan = gan_d, cls_real, latent, total_d
  LossBundle g;  // G step: gan = gan_g, cls_fake, latent, cycle, total_g
  double wall_seconds = 0;
};

/// Flat record; `include_time` = false gives the deterministic part only.
Json to_json(const TrainLogRecord& r, bool include_time = true);

struct OptimizerState {
  std::int64_t steps = 0;
  std::vector<Tensor<float>> first;
  std::vector<Tensor<float>> second;
};

/// Everything needed to resume training bit-compatibly.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  ModelConfig model_config;
  TrainConfig train_config;
  std::vector<std::string> domains;
  std::int64_t iteration = 0;
  std::vector<std::string> parameter_names;
  std::vector<Tensor<float>> parameters;
  OptimizerState generator_optimizer;
  OptimizerState discriminator_optimizer;
  std::string rng_state;
  IteratorState iterator;
};

/// Atomic write (temporary file, then rename). Container: magic, version,
/// payload length, payload (JSON header + raw tensors), CRC-32 of payload.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IntegrityError on truncation, checksum mismatch or a different
/// format version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the networks from a checkpoint, checking names and shapes.
Model<float> restore_model(const Checkpoint& ckpt);

struct TrainCallbacks {
  std::function<void(const TrainLogRecord&)> on_log;
  /// Receives each periodic checkpoint and the final one; returns the path it
  /// was stored at (empty if not stored), quoted in numeric-abort messages.
  std::function<std::string(const Checkpoint&)> on_checkpoint;
};

/// Alternating optimization of (E, G, M) against D. Owns the model and both
/// optimizers; the model lives on the heap so optimizer pointers stay valid
/// when the trainer moves.
class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data);
  static Trainer resume(const Checkpoint& ckpt, const Dataset& data);

  /// One D update on `batch` with fresh z and target labels.
  LossBundle step_d(const Batch& batch);
  /// One (E, G, M) update on `batch`; the cycle pass reuses the same z.
  LossBundle step_g(const Batch& batch);
  /// d_steps_per_g_step D updates and one G update on the next batch.
  TrainLogRecord iterate();
  /// Runs until total_iterations and returns the final checkpoint.
  Checkpoint run(const TrainCallbacks& callbacks = {});

  Checkpoint checkpoint() const;
  const Model<float>& model() const { return *model_; }
  Model<float>& model() { return *model_; }
  const TrainConfig& config() const { return train_cfg_; }
  std::int64_t iteration() const { return iteration_; }
  BatchIterator& batches() { return batches_; }

 private:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data,
          bool initialize);

  std::unique_ptr<Model<float>> model_;
  TrainConfig train_cfg_;
  const Dataset* data_;
  Adam<float> g_opt_;
  Adam<float> d_opt_;
  BatchIterator batches_;
  std::mt19937_64 rng_;
  std::int64_t iteration_ = 0;
  std::string last_checkpoint_;
};

/// Convenience wrapper around Trainer::run.
Checkpoint train_loop(const Dataset& data, const ModelConfig& model_cfg,
                      const TrainConfig& train_cfg, const TrainCallbacks& callbacks = {});

/// Appends one JSON object per line.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path, bool append = false);
  void write(const Json& record);

 private:
  std::ofstream out_;
};

}  // namespace sdit

#endif  // SDIT_TRAINING_HPP
