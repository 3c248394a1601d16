#ifndef SDIT_CONFIG_HPP
#define SDIT_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdit/evaluation.hpp"
#include "sdit/training.hpp"

// Run configuration file grammar (YAML subset): a mapping with optional
// sections `model`, `train`, `data`, `eval`, `ablation` and `output`, each a
// mapping of the keys echoed by `to_yaml`. Missing keys keep their defaults;
// unknown keys are errors.
//
// Precedence, lowest first: built-in defaults, config file, SDIT_OUT
// environment variable (output directory only), command-line flags.

namespace sdit {

/// One ablation switch setting.
struct VariantSpec {
  std::string name;
  bool attention = true;
  bool cin = true;
  bool gamma_learnable = true;
  bool beta_learnable = true;
  bool latent_loss = true;

  void apply(ModelConfig& model, TrainConfig& train) const;
};

/// Known names: full, no-lat, no-atten, no-atten-no-lat, no-cin, gamma-only,
/// beta-only, both (= full). Throws ConfigError listing them otherwise.
VariantSpec variant_by_name(const std::string& name);
std::vector<std::string> known_variants();
/// Table-1 rows followed by the CIN cases, duplicates removed.
std::vector<std::string> default_variant_matrix();

struct AblationSettings {
  std::vector<std::string> variants = default_variant_matrix();
};

struct OutputSettings {
  std::string dir = "runs/sdit";
  std::int64_t sample_every = 1000;  // probe grid cadence in iterations; 0 = final only
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  EvalConfig eval;
  AblationSettings ablation;
  OutputSettings output;

  /// Model domains and image size start from the data section's.
  RunConfig();

  /// Cross-section checks: model domains and image size follow the data.
  void validate() const;
};

Json to_json(const RunConfig& c);
void read_json(const Json& j, RunConfig& c);

/// YAML text -> JSON, with plain scalars typed as bool, integer, float or
/// null where they parse as such.
Json yaml_to_json(const std::string& text);
std::string to_yaml(const RunConfig& c);

/// Reads a config file on top of `base`. ConfigError on syntax errors.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace sdit

#endif  // SDIT_CONFIG_HPP
