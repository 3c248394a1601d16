#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "sdit/commands.hpp"

using namespace sdit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("sdit_cmd_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.data.image_size = 16;
  c.data.samples_per_domain = 12;
  c.data.test_per_domain = 6;
  c.model.image_size = 16;
  c.model.base_channels = 4;
  c.model.num_res_blocks = 1;
  c.model.discriminator_layers = 3;
  c.model.mapping_hidden = 16;
  c.train.total_iterations = 10;
  c.eval.n_samples = 3;
  c.eval.inputs_per_domain = 4;
  c.eval.reverse_train_per_domain = 6;
  c.eval.classifier.epochs = 2;
  c.eval.classifier.base_channels = 4;
  c.output.dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("variant switches") {
  const VariantSpec v = variant_by_name("no-atten-no-lat");
  ModelConfig m;
  TrainConfig t;
  v.apply(m, t);
  CHECK_FALSE(m.attention_enabled);
  CHECK(m.cin_enabled);
  CHECK(t.weights.latent == 0);

  ModelConfig g;
  TrainConfig tg;
  variant_by_name("gamma-only").apply(g, tg);
  CHECK(g.cin_gamma_learnable);
  CHECK_FALSE(g.cin_beta_learnable);
  CHECK(tg.weights.latent == 10);

  ModelConfig nc;
  TrainConfig tnc;
  variant_by_name("no-cin").apply(nc, tnc);
  CHECK_FALSE(nc.cin_enabled);
  CHECK(nc.attention_enabled);

  ModelConfig full, both;
  TrainConfig tf, tb;
  variant_by_name("full").apply(full, tf);
  variant_by_name("both").apply(both, tb);
  CHECK(full == both);
  CHECK(tf == tb);

  CHECK_THROWS_AS(variant_by_name("no-gan"), ConfigError);
  for (const auto& n : default_variant_matrix()) CHECK_NOTHROW(variant_by_name(n));
}

TEST_CASE("flags reproduce the attention-free variant without latent loss") {
  RunConfig flags;
  flags.model.attention_enabled = false;
  flags.train.weights.latent = 0;
  const RunConfig v = variant_config(RunConfig{}, "no-atten-no-lat");
  CHECK(v.model == flags.model);
  CHECK(v.train == flags.train);
}

TEST_CASE("default loss weights are echoed") {
  const Json j = yaml_to_json(to_yaml(RunConfig{}));
  const Json& w = j.at("train").at("weights");
  CHECK(w.at("gan").get<double>() == 10);
  CHECK(w.at("fake").get<double>() == 1);
  CHECK(w.at("real").get<double>() == 1);
  CHECK(w.at("latent").get<double>() == 10);
  CHECK(w.at("reconstruction").get<double>() == 800);
}

TEST_CASE("echoed yaml reloads to the same configuration") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path / "out: with colon");
  c.train.learning_rate = 3.0e-5;
  c.train.weights.latent = 0.125;
  c.model.attention_enabled = false;
  c.data.domains = {"green", "blue"};
  c.model.num_domains = 2;
  c.eval.embedder = "shape_mask";
  c.ablation.variants = {"full", "no-lat"};
  c.train.seed = 18446744073709551615ull;
  echo_config(c, tmp.path);
  const RunConfig back = load_run_config(tmp.path / "config.yaml");
  CHECK(to_json(back) == to_json(c));
  CHECK(to_yaml(back) == slurp(tmp.path / "config.yaml"));
}

TEST_CASE("config files: precedence of sections, unknown keys and syntax errors") {
  TempDir tmp;
  write_text(tmp.path / "a.yaml", "data:\n  domains: [green, blue, orange]\n  image_size: 128\ntrain:\n  batch_size: 2\n");
  const RunConfig c = load_run_config(tmp.path / "a.yaml");
  CHECK(c.model.num_domains == 3);
  CHECK(c.model.image_size == 128);
  CHECK(c.train.batch_size == 2);
  CHECK(c.train.learning_rate == RunConfig{}.train.learning_rate);
  CHECK_NOTHROW(c.validate());

  write_text(tmp.path / "b.yaml", "model:\n  num_domains: 5\n");
  CHECK_THROWS_AS(load_run_config(tmp.path / "b.yaml").validate(), ConfigError);

  write_text(tmp.path / "c.yaml", "train:\n  learning_rat: 0.1\n");
  CHECK_THROWS_AS(load_run_config(tmp.path / "c.yaml"), ConfigError);
  write_text(tmp.path / "d.yaml", "colour: red\n");
  CHECK_THROWS_AS(load_run_config(tmp.path / "d.yaml"), ConfigError);
  write_text(tmp.path / "e.yaml", "train: [unclosed\n");
  CHECK_THROWS_AS(load_run_config(tmp.path / "e.yaml"), ConfigError);
  write_text(tmp.path / "f.yaml", "ablation:\n  variants: [full, no-such]\n");
  CHECK_THROWS_AS(load_run_config(tmp.path / "f.yaml").validate(), ConfigError);
  CHECK_THROWS_AS(load_run_config(tmp.path / "missing.yaml"), ConfigError);
}

TEST_CASE("yaml scalars are typed") {
  const Json j = yaml_to_json("a: 3\nb: -2.5e-3\nc: true\nd: '7'\ne: ~\nf: text\n");
  CHECK(j.at("a").is_number_integer());
  CHECK(j.at("b").get<double>() == doctest::Approx(-2.5e-3));
  CHECK(j.at("c").get<bool>());
  CHECK(j.at("d").get<std::string>() == "7");
  CHECK(j.at("e").is_null());
  CHECK(j.at("f").get<std::string>() == "text");
}

TEST_CASE("errors map to distinct exit codes") {
  std::ostringstream log;
  CHECK(guarded(log, [] {}) == exit_ok);
  CHECK(guarded(log, [] { throw ConfigError("c"); }) == exit_config);
  CHECK(guarded(log, [] { throw DomainError("d"); }) == exit_config);
  CHECK(guarded(log, [] { throw DataError("x"); }) == exit_data);
  CHECK(guarded(log, [] { throw IntegrityError("i"); }) == exit_data);
  CHECK(guarded(log, [] { throw NumericError("n"); }) == exit_numeric);
  CHECK(guarded(log, [] { throw std::runtime_error("r"); }) == exit_failure);
  CHECK(log.str().find("numeric error: n") != std::string::npos);
}

TEST_CASE("default dataset is 4 x 800 train and 4 x 200 test images") {
  TempDir tmp;
  RunConfig c;
  c.output.dir = tmp.path.string();
  std::ostringstream log;
  const MakeDatasetResult r = cmd_make_dataset(c, false, log);
  CHECK(r.train_images == 3200);
  CHECK(r.test_images == 800);
  Index files = 0;
  for (const auto& e : fs::recursive_directory_iterator(r.root)) files += e.path().extension() == ".png";
  CHECK(files == 4000);
  CHECK(fs::exists(r.root / "train" / "orange"));
  const Json manifest = Json::parse(slurp(r.root / "manifest.json"));
  CHECK(manifest.at("domains") == Json(c.data.domains));
  CHECK(manifest.at("train_images") == 3200);
  CHECK(manifest.at("seed") == c.data.seed);

  RunConfig folder = c;
  folder.data.kind = DatasetKind::folder;
  folder.data.root = r.root.string();
  const DatasetSplit a = load_dataset(folder.data);
  const DatasetSplit b = make_synthetic_dataset(c.data);
  REQUIRE(a.test.size() == b.test.size());
  CHECK((a.test.samples[5].image.data - b.test.samples[5].image.data).cwiseAbs().maxCoeff() <= 1.0f / 255 + 1e-6f);
}

TEST_CASE("make-dataset is reproducible and refuses to overwrite") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  c.data.root = (tmp.path / "a").string();
  std::ostringstream log;
  cmd_make_dataset(c, false, log);
  const auto first = tree(tmp.path / "a");
  CHECK(first.size() == 4 * 18 + 1);
  CHECK_THROWS_AS(cmd_make_dataset(c, false, log), ConfigError);
  cmd_make_dataset(c, true, log);
  CHECK(tree(tmp.path / "a") == first);

  c.data.root = (tmp.path / "b").string();
  cmd_make_dataset(c, false, log);
  CHECK(tree(tmp.path / "b") == first);

  c.data.root = (tmp.path / "c").string();
  c.data.domains = {"green", "teal"};
  CHECK(guarded(log, [&] { cmd_make_dataset(c, false, log); }) == exit_config);
}

TEST_CASE("a 10-iteration smoke run writes one checkpoint") {
  TempDir tmp;
  const RunConfig c = tiny(tmp.path);
  std::ostringstream log;
  const TrainResult r = cmd_train(c, tmp.path, log);
  Index ckpts = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path)) ckpts += e.path().extension() == ".ckpt";
  CHECK(ckpts == 1);
  CHECK(fs::exists(r.final_checkpoint));
  CHECK(r.checkpoint.iteration == 10);
  CHECK(read_metrics(r.metrics).size() == 1);
  CHECK(r.sample_grids.size() == 1);
  CHECK(load_run_config(tmp.path / "config.yaml").model == c.model);
}

TEST_CASE("identical config and seed give identical artifacts") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  c.train.log_every = 5;
  c.train.checkpoint_every = 5;
  c.output.sample_every = 5;
  std::ostringstream log;
  cmd_train(c, tmp.path / "a", log);
  cmd_train(c, tmp.path / "b", log);
  auto a = tree(tmp.path / "a");
  auto b = tree(tmp.path / "b");
  for (auto* t : {&a, &b}) {
    t->erase("config.yaml");  // differs in output.dir only
    t->erase("metrics.jsonl");
  }
  CHECK(a.size() == 4);
  CHECK(a == b);
  auto deterministic = [](const fs::path& p) {
    std::vector<Json> out;
    for (Json j : read_metrics(p)) {
      j.erase("wall_seconds");
      out.push_back(j);
    }
    return out;
  };
  CHECK(deterministic(tmp.path / "a" / "metrics.jsonl") == deterministic(tmp.path / "b" / "metrics.jsonl"));
}

TEST_CASE("resume through the command continues the run") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  std::ostringstream log;
  const TrainResult full = cmd_train(c, tmp.path / "full", log);
  c.train.total_iterations = 4;
  const TrainResult part = cmd_train(c, tmp.path / "part", log);
  c.train.total_iterations = 10;
  const TrainResult resumed = cmd_train(c, tmp.path / "resumed", log, part.final_checkpoint);
  CHECK(slurp(resumed.final_checkpoint) == slurp(full.final_checkpoint));
}

TEST_CASE("translate writes one grid per domain from one checkpoint") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  std::ostringstream log;
  const TrainResult t = cmd_train(c, tmp.path, log);

  TranslateRequest req;
  req.checkpoint = t.final_checkpoint;
  req.n_samples = 1;
  const auto grids = cmd_translate(c, req, log);
  CHECK(grids.size() == 4);
  std::vector<std::string> first;
  for (const auto& g : grids) first.push_back(slurp(g));
  const auto again = cmd_translate(c, req, log);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(slurp(again[i]) == first[i]);

  write_image(tmp.path / "in.png", make_synthetic_dataset(c.data).test.samples[0].image);
  req.inputs = {tmp.path / "in.png"};
  req.targets = {"blue"};
  req.n_samples = 10;
  const auto one = cmd_translate(c, req, log);
  REQUIRE(one.size() == 1);
  CHECK(one[0].filename() == "blue.png");

  req.targets = {"teal"};
  try {
    cmd_translate(c, req, log);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("teal") != std::string::npos);
    CHECK(msg.find("green yellow blue orange") != std::string::npos);
  }
}

TEST_CASE("evaluate report is keyed by domain and deterministic") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  std::ostringstream log;
  const TrainResult t = cmd_train(c, tmp.path, log);
  const EvaluateResult a = cmd_evaluate(c, t.final_checkpoint, log);
  const Json j = Json::parse(slurp(a.report_path));
  for (const char* section : {"reverse_classification_accuracy", "diversity"}) {
    for (const auto& d : c.data.domains) CHECK(j.at(section).contains(d));
    CHECK(j.at(section).contains("mean"));
  }
  CHECK(a.report.grids.size() == 4);
  const std::string first = slurp(a.report_path);
  const EvaluateResult b = cmd_evaluate(c, t.final_checkpoint, log);
  CHECK(slurp(b.report_path) == first);

  RunConfig other = c;
  other.data.domains = {"green", "blue", "orange", "red"};
  CHECK_THROWS_AS(cmd_evaluate(other, t.final_checkpoint, log), ConfigError);
}

TEST_CASE("a single-variant ablation trains once and reuses its run") {
  TempDir tmp;
  RunConfig c = tiny(tmp.path);
  c.train.total_iterations = 3;
  c.ablation.variants = {"full"};
  std::ostringstream log;
  const AblateResult a = cmd_ablate(c, log);
  REQUIRE(a.report.names.size() == 1);
  CHECK(fs::exists(a.report_path));
  CHECK(fs::exists(a.variant_dirs[0] / "model.ckpt"));
  const auto stamp = fs::last_write_time(a.variant_dirs[0] / "model.ckpt");
  std::ostringstream second;
  const AblateResult b = cmd_ablate(c, second);
  CHECK(second.str().find("reusing") != std::string::npos);
  CHECK(fs::last_write_time(b.variant_dirs[0] / "model.ckpt") == stamp);
  CHECK(to_json(b.report) == to_json(a.report));

  c.train.total_iterations = 4;
  std::ostringstream third;
  cmd_ablate(c, third);
  CHECK(third.str().find("reusing") == std::string::npos);
}

TEST_CASE("metrics reader rejects malformed lines") {
  TempDir tmp;
  write_text(tmp.path / "m.jsonl", "{\"iteration\": 1}\n\n{\"iteration\": 2}\n");
  CHECK(read_metrics(tmp.path / "m.jsonl").size() == 2);
  write_text(tmp.path / "bad.jsonl", "{\"iteration\": 1}\n{oops\n");
  CHECK_THROWS_AS(read_metrics(tmp.path / "bad.jsonl"), DataError);
  CHECK_THROWS_AS(read_metrics(tmp.path / "none.jsonl"), DataError);
}
