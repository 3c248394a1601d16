#include "sdit/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "sdit/image_io.hpp"

namespace sdit {

namespace fs = std::filesystem;

namespace {

std::string padded(std::int64_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*lld", width, static_cast<long long>(v));
  return buf;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

void write_json_file(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Fixed probe set: inputs from the test split and a seeded latent set.
struct Probe {
  std::vector<LabeledSample> inputs;
  Tensor<float> z;  // one row per column
};

Probe make_probe(const Dataset& test, const ModelConfig& mc, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 77u};
  std::mt19937_64 rng(seq);
  return {probe_inputs(test, 4), sample_latent<float>(3, mc.latent_dim, rng)};
}

/// rows = probe inputs; columns = input, then every domain x probe z.
Raster probe_grid(const Model<float>& m, const Probe& p, const std::vector<std::string>& domains) {
  const int c = static_cast<int>(domains.size());
  std::vector<std::string> headers{"input"};
  for (const auto& d : domains) {
    for (Index k = 0; k < p.z.shape.n; ++k) headers.push_back(upper(d.substr(0, 3)) + std::to_string(k + 1));
  }
  std::vector<std::vector<Tensor<float>>> cells;
  for (const auto& s : p.inputs) {
    std::vector<Tensor<float>> row{s.image};
    for (int d = 1; d <= c; ++d) {
      for (Index k = 0; k < p.z.shape.n; ++k) {
        row.push_back(generate(m, s.image, std::vector<DomainLabel>{DomainLabel(d, c)}, p.z.slice_batch(k, 1)));
      }
    }
    cells.push_back(std::move(row));
  }
  return compose_grid(cells, headers, {});
}

void check_domains(const RunConfig& cfg, const Checkpoint& ckpt) {
  if (ckpt.domains != cfg.data.domains) {
    std::string have, want;
    for (const auto& d : ckpt.domains) have += " " + d;
    for (const auto& d : cfg.data.domains) want += " " + d;
    throw ConfigError("checkpoint domains [" + have + " ] differ from configured data domains [" + want + " ]");
  }
  if (ckpt.model_config.image_size != cfg.data.image_size) {
    throw ConfigError("checkpoint image size " + std::to_string(ckpt.model_config.image_size) +
                      " differs from data.image_size " + std::to_string(cfg.data.image_size));
  }
}

bool same_setup(const Checkpoint& a, const RunConfig& cfg) {
  return a.model_config == cfg.model && a.train_config == cfg.train && a.domains == cfg.data.domains &&
         a.iteration == cfg.train.total_iterations;
}

}  // namespace

int guarded(std::ostream& log, const std::function<void()>& body) {
  try {
    body();
    return exit_ok;
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const DomainError& e) {
    log << "invalid argument: " << e.what() << '\n';
    return exit_config;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const IntegrityError& e) {
    log << "integrity error: " << e.what() << '\n';
    return exit_data;
  } catch (const NumericError& e) {
    log << "numeric error: " << e.what() << '\n';
    return exit_numeric;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

DatasetSplit load_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind == DatasetKind::synthetic) return make_synthetic_dataset(spec);
  if (spec.root.empty()) throw ConfigError("data.root is required for folder datasets");
  const fs::path root(spec.root);
  return {load_folder_dataset(root / "train", spec), load_folder_dataset(root / "test", spec)};
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.yaml", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "config.yaml").string());
  out << to_yaml(cfg);
}

std::vector<LabeledSample> probe_inputs(const Dataset& data, int count) {
  std::vector<LabeledSample> out;
  std::vector<std::vector<const LabeledSample*>> by_domain;
  for (int d = 1; d <= data.num_domains(); ++d) by_domain.push_back(data.of_domain(d));
  for (std::size_t round = 0; static_cast<int>(out.size()) < count; ++round) {
    bool any = false;
    for (const auto& members : by_domain) {
      if (round < members.size() && static_cast<int>(out.size()) < count) {
        out.push_back(*members[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  if (out.empty()) throw DataError("no probe inputs available");
  return out;
}

MakeDatasetResult cmd_make_dataset(const RunConfig& cfg, bool force, std::ostream& log) {
  cfg.data.validate();
  if (cfg.data.kind != DatasetKind::synthetic) throw ConfigError("make-dataset needs data.kind = synthetic");
  const fs::path root = cfg.data.root.empty() ? fs::path(cfg.output.dir) / "dataset" : fs::path(cfg.data.root);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) throw ConfigError("dataset directory " + root.string() + " is not empty (use --force to replace it)");
    for (const char* part : {"train", "test", "manifest.json"}) fs::remove_all(root / part);
  }
  const DatasetSplit split = make_synthetic_dataset(cfg.data);
  write_folder_dataset(split.train, root / "train");
  write_folder_dataset(split.test, root / "test");
  Json manifest{{"domains", cfg.data.domains},
                {"seed", cfg.data.seed},
                {"image_size", cfg.data.image_size},
                {"train_per_domain", cfg.data.samples_per_domain},
                {"test_per_domain", cfg.data.test_per_domain},
                {"train_images", split.train.size()},
                {"test_images", split.test.size()}};
  write_json_file(root / "manifest.json", manifest);
  log << "wrote " << split.train.size() << " train and " << split.test.size() << " test images to " << root.string()
      << '\n';
  return {root, split.train.size(), split.test.size()};
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log,
                      const std::optional<fs::path>& resume) {
  cfg.validate();
  echo_config(cfg, out_dir);
  const DatasetSplit split = load_dataset(cfg.data);

  std::optional<Trainer> trainer;
  if (resume) {
    Checkpoint ckpt = load_checkpoint(*resume);
    check_domains(cfg, ckpt);
    ckpt.train_config.total_iterations = cfg.train.total_iterations;
    trainer.emplace(Trainer::resume(ckpt, split.train));
    log << "resuming from " << resume->string() << " at iteration " << ckpt.iteration << '\n';
  } else {
    trainer.emplace(cfg.model, cfg.train, split.train);
  }

  TrainResult result;
  result.metrics = out_dir / "metrics.jsonl";
  MetricsWriter metrics(result.metrics, resume.has_value());
  const Probe probe = make_probe(split.test, cfg.model, cfg.train.seed);
  const fs::path samples = out_dir / "samples";
  auto write_samples = [&](std::int64_t iteration) {
    fs::create_directories(samples);
    const fs::path p = samples / ("iter_" + padded(iteration, 7) + ".png");
    write_png(p, probe_grid(trainer->model(), probe, cfg.data.domains));
    result.sample_grids.push_back(p);
  };

  const std::int64_t total = cfg.train.total_iterations;
  const std::int64_t progress_every = std::max<std::int64_t>(1, total / 20);
  TrainCallbacks callbacks;
  callbacks.on_log = [&](const TrainLogRecord& r) {
    metrics.write(to_json(r));
    if (cfg.output.sample_every > 0 && r.iteration % cfg.output.sample_every == 0) write_samples(r.iteration);
    if (r.iteration % progress_every == 0) {
      char line[160];
      std::snprintf(line, sizeof line, "iter %lld/%lld  d %.4f  g %.4f  cycle %.4f  (%.3fs/iter)\n",
                    static_cast<long long>(r.iteration), static_cast<long long>(total), r.d.total_d, r.g.total_g,
                    r.g.cycle, r.wall_seconds);
      log << line << std::flush;
    }
  };
  callbacks.on_checkpoint = [&](const Checkpoint& c) {
    const fs::path p = c.iteration == total ? out_dir / "model.ckpt"
                                            : out_dir / "checkpoints" / ("iter_" + padded(c.iteration, 7) + ".ckpt");
    save_checkpoint(c, p);
    return p.string();
  };
  result.checkpoint = trainer->run(callbacks);
  result.final_checkpoint = out_dir / "model.ckpt";
  if (cfg.output.sample_every == 0 || total % cfg.output.sample_every != 0 || total % cfg.train.log_every != 0) {
    write_samples(total);
  }
  log << "final checkpoint " << result.final_checkpoint.string() << '\n';
  return result;
}

std::vector<fs::path> cmd_translate(const RunConfig& cfg, const TranslateRequest& req, std::ostream& log) {
  if (req.n_samples < 1) throw ConfigError("translate: n_samples must be >= 1");
  const Checkpoint ckpt = load_checkpoint(req.checkpoint);
  const Model<float> model = restore_model(ckpt);
  const int c = static_cast<int>(ckpt.domains.size());
  const int size = ckpt.model_config.image_size;

  std::vector<int> targets;
  if (req.targets.empty() || (req.targets.size() == 1 && req.targets[0] == "all")) {
    for (int d = 1; d <= c; ++d) targets.push_back(d);
  } else {
    for (const auto& name : req.targets) {
      auto it = std::find(ckpt.domains.begin(), ckpt.domains.end(), name);
      if (it == ckpt.domains.end()) {
        std::string valid;
        for (const auto& d : ckpt.domains) valid += " " + d;
        throw ConfigError("unknown target domain '" + name + "'; valid domains:" + valid);
      }
      targets.push_back(static_cast<int>(it - ckpt.domains.begin()) + 1);
    }
  }

  std::vector<LabeledSample> inputs;
  if (req.inputs.empty()) {
    RunConfig data_cfg = cfg;
    data_cfg.data.domains = ckpt.domains;
    data_cfg.data.image_size = size;
    inputs = probe_inputs(load_dataset(data_cfg.data).test, 4);
  } else {
    for (const auto& p : req.inputs) {
      Tensor<float> img = read_image(p);
      if (img.shape.h != size || img.shape.w != size) img = resize_bilinear(img, size, size);
      inputs.push_back({std::move(img), DomainLabel(1, c), std::nullopt});
    }
  }

  const fs::path dir = fs::path(cfg.output.dir) / "translate";
  fs::create_directories(dir);
  const Translator t = model_translator(model);
  std::vector<fs::path> written;
  for (int d : targets) {
    const std::string& name = ckpt.domains[static_cast<std::size_t>(d - 1)];
    const Raster grid =
        translation_grid(t, inputs, DomainLabel(d, c), req.n_samples, req.seed, model.config.latent_dim, upper(name));
    const fs::path p = dir / (name + ".png");
    write_png(p, grid);
    written.push_back(p);
    log << "wrote " << p.string() << '\n';
  }
  return written;
}

EvaluateResult cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  cfg.eval.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  check_domains(cfg, ckpt);
  const Model<float> model = restore_model(ckpt);
  const DatasetSplit split = load_dataset(cfg.data);

  std::shared_ptr<const DomainClassifier> classifier;
  if (cfg.eval.embedder == "classifier") classifier = train_embedding_classifier(split.train, cfg.eval.classifier);
  const Embedder embedder = make_embedder(cfg.eval.embedder, cfg.data.image_size, classifier);
  const Translator t = model_translator(model);
  EvaluateResult r;
  r.report = evaluate(t, split.train, split.test, cfg.eval, embedder);
  r.report.iteration = ckpt.iteration;
  r.report.fingerprint = fingerprint(Json{{"model", to_json(ckpt.model_config)},
                                          {"train", to_json(ckpt.train_config)},
                                          {"eval", to_json(cfg.eval)}});
  const fs::path dir = fs::path(cfg.output.dir) / "eval";
  const std::string stem = r.report.fingerprint + "_" + padded(ckpt.iteration, 7);
  const auto inputs = probe_inputs(split.test, 4);
  for (int d = 1; d <= split.test.num_domains(); ++d) {
    const std::string& name = split.test.domains[static_cast<std::size_t>(d - 1)];
    const fs::path p = dir / (stem + "_" + name + ".png");
    fs::create_directories(dir);
    write_png(p, translation_grid(t, inputs, DomainLabel(d, split.test.num_domains()), cfg.eval.n_samples,
                                  cfg.eval.seed, model.config.latent_dim, upper(name)));
    r.report.grids.push_back(p.string());
  }
  r.report_path = dir / ("report_" + stem + ".json");
  write_json_file(r.report_path, to_json(r.report));
  log << "reverse-classification accuracy " << r.report.mean_accuracy << ", diversity " << r.report.mean_diversity
      << " (" << r.report.embedder << "), content distance " << r.report.content_distance << '\n';
  log << "wrote " << r.report_path.string() << '\n';
  return r;
}

RunConfig variant_config(const RunConfig& cfg, const std::string& variant) {
  RunConfig v = cfg;
  variant_by_name(variant).apply(v.model, v.train);
  v.ablation.variants = {variant};
  v.output.dir = (fs::path(cfg.output.dir) / "variants" / variant).string();
  return v;
}

AblateResult cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.ablation.variants.empty()) throw ConfigError("ablation.variants is empty");
  echo_config(cfg, cfg.output.dir);
  const DatasetSplit split = load_dataset(cfg.data);

  AblateResult result;
  std::vector<AblationVariant> variants;
  for (const auto& name : cfg.ablation.variants) {
    const RunConfig v = variant_config(cfg, name);
    const fs::path dir = v.output.dir;
    const fs::path final_ckpt = dir / "model.ckpt";
    std::optional<Checkpoint> ckpt;
    if (fs::exists(final_ckpt)) {
      try {
        Checkpoint existing = load_checkpoint(final_ckpt);
        if (same_setup(existing, v)) ckpt = std::move(existing);
      } catch (const IntegrityError& e) {
        log << "retraining " << name << ": " << e.what() << '\n';
      }
    }
    if (ckpt) {
      log << "variant " << name << ": reusing " << final_ckpt.string() << '\n';
    } else {
      log << "variant " << name << ": training " << v.train.total_iterations << " iterations\n";
      ckpt = cmd_train(v, dir, log).checkpoint;
    }
    variants.push_back({name, std::move(*ckpt)});
    result.variant_dirs.push_back(dir);
  }

  result.report = ablation_report(variants, split.train, split.test, cfg.eval, fs::path(cfg.output.dir) / "ablation");
  result.report_path = fs::path(cfg.output.dir) / "ablation" / "report.json";
  write_json_file(result.report_path, to_json(result.report));
  for (std::size_t i = 0; i < result.report.names.size(); ++i) {
    const EvalReport& r = result.report.reports[i];
    char line[200];
    std::snprintf(line, sizeof line, "%-16s diversity %.4f  raw %.4f  accuracy %.3f  content %.4f\n",
                  result.report.names[i].c_str(), r.mean_diversity, r.mean_raw_pixel_diversity, r.mean_accuracy,
                  r.content_distance);
    log << line;
  }
  log << "wrote " << result.report_path.string() << '\n';
  return result;
}

std::vector<Json> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read metrics " + path.string());
  std::vector<Json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed metrics line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sdit
