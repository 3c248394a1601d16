#ifndef SDIT_COMMANDS_HPP
#define SDIT_COMMANDS_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdit/config.hpp"

namespace sdit {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_data = 3,
  exit_numeric = 4,
};

/// Runs `body`, reporting any exception on `log` and mapping it to an exit
/// code (ConfigError/DomainError 2, DataError/IntegrityError 3,
/// NumericError 4, anything else 1).
int guarded(std::ostream& log, const std::function<void()>& body);

/// Synthetic splits are generated in memory; folder datasets are read from
/// root/train and root/test.
DatasetSplit load_dataset(const DatasetSpec& spec);

/// Writes the resolved config as config.yaml into `dir`.
void echo_config(const RunConfig& cfg, const std::filesystem::path& dir);

struct MakeDatasetResult {
  std::filesystem::path root;
  Index train_images = 0;
  Index test_images = 0;
};

/// Writes root/{train,test}/<domain>/<index>.png and root/manifest.json,
/// root = data.root or <out>/dataset. Refuses a non-empty root unless
/// `force`, which replaces the previous dataset files.
MakeDatasetResult cmd_make_dataset(const RunConfig& cfg, bool force, std::ostream& log);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics;
  std::vector<std::filesystem::path> sample_grids;
  Checkpoint checkpoint;
};

/// Trains into `out_dir` (config.yaml, metrics.jsonl, checkpoints/,
/// samples/, model.ckpt). With `resume`, continues from that checkpoint.
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log,
                      const std::optional<std::filesystem::path>& resume = std::nullopt);

struct TranslateRequest {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> inputs;  // empty = probe inputs from the test split
  std::vector<std::string> targets;           // empty = every domain
  int n_samples = 10;
  std::uint64_t seed = 1;
};

/// One grid per target domain: rows = inputs, columns = latent samples.
/// Unknown target names raise ConfigError listing the valid ones.
std::vector<std::filesystem::path> cmd_translate(const RunConfig& cfg, const TranslateRequest& req,
                                                 std::ostream& log);

struct EvaluateResult {
  std::filesystem::path report_path;
  EvalReport report;
};

EvaluateResult cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

struct AblateResult {
  std::filesystem::path report_path;
  AblationReport report;
  std::vector<std::filesystem::path> variant_dirs;  // aligned with report.names
};

/// Trains every variant in cfg.ablation.variants under <out>/variants/<name>
/// and compares them. A variant whose final checkpoint already exists with
/// the same configuration is not retrained.
AblateResult cmd_ablate(const RunConfig& cfg, std::ostream& log);

/// Builds the variant's run configuration from the shared one.
RunConfig variant_config(const RunConfig& cfg, const std::string& variant);

/// Probe inputs used by training grids and default translations: the first
/// sample of each domain, cycling, `count` in total.
std::vector<LabeledSample> probe_inputs(const Dataset& data, int count);

/// Parses a metrics.jsonl stream.
std::vector<Json> read_metrics(const std::filesystem::path& path);

}  // namespace sdit

#endif  // SDIT_COMMANDS_HPP
