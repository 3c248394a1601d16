#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "sdit/commands.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

struct TrainFlags {
  std::optional<std::int64_t> iterations;
  bool no_attention = false;
  std::optional<double> lat_weight;
  std::string variant;
  std::string resume;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(',', start), s.size());
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

/// defaults < config file < SDIT_OUT < flags
sdit::RunConfig resolve(const GlobalFlags& g) {
  sdit::RunConfig cfg;
  if (!g.config.empty()) cfg = sdit::load_run_config(g.config, cfg);
  if (const char* env = std::getenv("SDIT_OUT"); env != nullptr && *env != '\0') cfg.output.dir = env;
  if (!g.out.empty()) cfg.output.dir = g.out;
  if (g.seed) {
    cfg.data.seed = *g.seed;
    cfg.train.seed = *g.seed;
    cfg.eval.seed = *g.seed;
  }
  return cfg;
}

void apply_train_flags(const TrainFlags& t, sdit::RunConfig& cfg) {
  if (!t.variant.empty()) sdit::variant_by_name(t.variant).apply(cfg.model, cfg.train);
  if (t.iterations) cfg.train.total_iterations = *t.iterations;
  if (t.no_attention) cfg.model.attention_enabled = false;
  if (t.lat_weight) cfg.train.weights.latent = *t.lat_weight;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-generator multi-domain, multimodal image-to-image translation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for data, training and evaluation");
  app.add_option("--out", g.out, "Output directory (overrides SDIT_OUT and the config)");
  app.add_flag("--force", g.force, "Replace an existing dataset directory");

  auto* make = app.add_subcommand("make-dataset", "Write the synthetic dataset in folder layout");

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--iterations", tf.iterations, "Total iterations");
  train->add_flag("--no-attention", tf.no_attention, "Disable the attention branch");
  train->add_option("--lat-weight", tf.lat_weight, "Latent reconstruction weight");
  train->add_option("--variant", tf.variant, "Apply a named ablation variant");
  train->add_option("--resume", tf.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  sdit::TranslateRequest tr;
  std::string targets;
  std::optional<int> tr_samples;
  auto* translate = app.add_subcommand("translate", "Translate images into target domains");
  translate->add_option("--checkpoint", tr.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  translate->add_option("--inputs", tr.inputs, "Input images (default: probe images from the test split)")
      ->check(CLI::ExistingFile);
  translate->add_option("--target", targets, "Comma-separated target domains or 'all'")->default_val("all");
  translate->add_option("--n-samples", tr_samples, "Latent samples per input (default 10)");

  std::string eval_ckpt;
  std::optional<int> eval_samples;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint");
  evaluate->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--n-samples", eval_samples, "Latent samples per input");

  std::string variants;
  std::optional<std::int64_t> ablate_iterations;
  auto* ablate = app.add_subcommand("ablate", "Train and compare ablation variants");
  ablate->add_option("--variants", variants, "Comma-separated variant names");
  ablate->add_option("--iterations", ablate_iterations, "Total iterations per variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sdit::exit_ok : sdit::exit_config;
  }

  return sdit::guarded(std::cerr, [&] {
    sdit::RunConfig cfg = resolve(g);
    if (make->parsed()) {
      sdit::cmd_make_dataset(cfg, g.force, std::cout);
    } else if (train->parsed()) {
      apply_train_flags(tf, cfg);
      std::optional<std::filesystem::path> resume;
      if (!tf.resume.empty()) resume = tf.resume;
      sdit::cmd_train(cfg, cfg.output.dir, std::cout, resume);
    } else if (translate->parsed()) {
      tr.targets = split_list(targets);
      tr.seed = cfg.eval.seed;
      tr.n_samples = tr_samples.value_or(cfg.eval.n_samples);
      sdit::cmd_translate(cfg, tr, std::cout);
    } else if (evaluate->parsed()) {
      if (eval_samples) cfg.eval.n_samples = *eval_samples;
      sdit::cmd_evaluate(cfg, eval_ckpt, std::cout);
    } else if (ablate->parsed()) {
      if (!variants.empty()) cfg.ablation.variants = split_list(variants);
      if (ablate_iterations) cfg.train.total_iterations = *ablate_iterations;
      sdit::cmd_ablate(cfg, std::cout);
    }
  });
}
