// Acceptance checks, one PASS/FAIL line per criterion. Training runs for the
// toy criteria are cached under the work directory (first argument) and
// reused when their configuration is unchanged.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "sdit/commands.hpp"
#include "support/model_gradcheck.hpp"

using namespace sdit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class Checklist {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
    ++count_;
  }
  bool pass() const { return pass_; }
  std::string summary() const {
    if (pass_) return std::to_string(count_) + " checks";
    std::string s = std::to_string(failures_.size()) + " of " + std::to_string(count_) + " checks failed:";
    for (const auto& f : failures_) s += " [" + f + "]";
    return s;
  }

 private:
  bool pass_ = true;
  int count_ = 0;
  std::vector<std::string> failures_;
};

Tensor<double> constant(Shape s, double v) { return Tensor<double>::constant(s, v); }

Tensor<double> row(std::initializer_list<double> values) {
  Tensor<double> t(Shape{1, 1, 1, static_cast<Index>(values.size())});
  Index i = 0;
  for (double v : values) t.data(0, i++) = v;
  return t;
}

bool four_places(double value, double expected) { return std::abs(value - expected) < 5e-5; }

// ---------------------------------------------------------------------------
// 1. Numeric core

Outcome numeric_core() {
  Checklist c;
  std::mt19937_64 rng(101);

  double worst_mean = 0, worst_std = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s{2, 6, 5, 4};
    const Tensor<double> e = testing::random_tensor(s, rng, 1.0 + trial);
    const Tensor<double> gamma = testing::random_tensor(Shape{2, 1, 1, 4}, rng, 3.0);
    const Tensor<double> beta = testing::random_tensor(Shape{2, 1, 1, 4}, rng, 3.0);
    const Tensor<double> out = cin(e, gamma, beta);
    for (Index n = 0; n < s.n; ++n) {
      const auto rows = out.sample_rows(n);
      for (Index ch = 0; ch < s.c; ++ch) {
        const double mean = rows.col(ch).mean();
        const double sd = std::sqrt((rows.col(ch).array() - mean).square().mean());
        worst_mean = std::max(worst_mean, std::abs(mean - beta.data(n, ch)));
        worst_std = std::max(worst_std, std::abs(sd - std::abs(gamma.data(n, ch))));
      }
    }
  }
  c.check(worst_mean < 1e-4, "cin mean error " + fmt("%.2e", worst_mean));
  c.check(worst_std < 1e-3, "cin std error " + fmt("%.2e", worst_std));

  {
    const Shape s{2, 4, 4, 8};
    const Tensor<float> e = testing::random_tensor(s, rng).cast<float>();
    const Tensor<float> f = testing::random_tensor(s, rng).cast<float>();
    c.check(blend(e, Tensor<float>(s), f).data == e.data, "blend a=0");
    c.check(blend(e, Tensor<float>::constant(s, 1.f), f).data == f.data, "blend a=1");
    c.check(blend(row({4.0}), row({0.25}), row({8.0})).data(0, 0) == 5.0, "blend scalar");
  }

  {
    Tensor<double> e(Shape{1, 1, 2, 1});
    e.data << 1.0, 3.0;
    const Tensor<double> out = cin(e, row({2.0}), row({0.5}));
    c.check(four_places(out.data(0, 0), -1.5) && four_places(out.data(1, 0), 2.5), "cin [1,3]");
    c.check((cin(e, row({0.0}), row({7.0})).data.array() == 7.0).all(), "cin gamma 0");
  }

  Graph<double> g(groups_none);
  auto v = [&](const Tensor<double>& t) { return g.constant(t); };
  const Shape patch{2, 2, 2, 1};
  c.check(four_places(scalar_value(adversarial_d_loss(v(constant(patch, 60)), v(constant(patch, -60)))), 0),
          "gan_d perfect");
  c.check(four_places(scalar_value(adversarial_d_loss(v(constant(patch, 0)), v(constant(patch, 0)))), 1.3863),
          "gan_d undecided");
  c.check(std::isfinite(scalar_value(adversarial_d_loss(v(constant(patch, -80)), v(constant(patch, 80))))),
          "gan_d stabilized");
  c.check(four_places(scalar_value(adversarial_g_loss(v(constant(patch, 60)))), 0), "gan_g fooled");
  c.check(four_places(scalar_value(adversarial_g_loss(v(constant(patch, 0)))), 0.6931), "gan_g undecided");

  const std::vector<DomainLabel> first{DomainLabel(1, 4)};
  c.check(four_places(scalar_value(cls_fake_loss(v(row({60, -60, -60, -60})), first)), 0), "cls certain");
  c.check(four_places(scalar_value(cls_fake_loss(v(row({0, 0, 0, 0})), first)), 1.3863), "cls_fake uniform");
  c.check(four_places(scalar_value(cls_real_loss(v(row({0, 0, 0, 0})), first)), 1.3863), "cls_real uniform");
  const double third = std::log(0.3);
  c.check(four_places(scalar_value(cls_fake_loss(v(row({std::log(0.1), third, third, third})), first)), 2.3026),
          "cls p=0.1");
  const Tensor<double> z = testing::random_tensor(Shape{1, 1, 1, 8}, rng);
  Tensor<double> neg = z;
  neg.data *= -1.0;
  c.check(four_places(scalar_value(latent_rec_loss(v(z), v(z))), 0), "latent equal");
  c.check(four_places(scalar_value(latent_rec_loss(v(Tensor<double>(z.shape)), v(constant(z.shape, 1)))), 1.0),
          "latent zero vs ones");
  c.check(four_places(scalar_value(latent_rec_loss(v(neg), v(neg))), 0), "latent negated");
  const Shape img{1, 4, 4, 3};
  c.check(four_places(scalar_value(cycle_loss(v(constant(img, 0.3)), v(constant(img, 0.3)))), 0), "cycle equal");
  c.check(four_places(scalar_value(cycle_loss(v(Tensor<double>(img)), v(constant(img, 0.5)))), 0.5), "cycle 0.5");

  const LossWeights w;
  c.check(w.gan == 10 && w.fake == 1 && w.real == 1 && w.latent == 10 && w.reconstruction == 800, "default weights");
  c.check(generator_objective(1.0, 1.0, 1.0, 1.0, w) == 821.0, "generator objective 821");
  c.check(discriminator_objective(1.0, 1.0, 1.0, w) == 21.0, "discriminator objective 21");
  LossWeights zero;
  zero.gan = zero.fake = zero.real = zero.latent = zero.reconstruction = 0;
  c.check(generator_objective(3.0, 2.0, 5.0, 7.0, zero) == 0.0, "zero weights");
  return {c.pass(), c.summary()};
}

// ---------------------------------------------------------------------------
// 2. Gradient checks

Outcome gradient_checks() {
  Checklist c;
  double worst = 0;
  std::string where;
  Index params = 0;
  for (std::uint64_t seed = 21; seed < 29; ++seed) {
    Model<double> m = Model<double>::create(testing::gradcheck_config(), seed);
    testing::randomize_biases(m, seed);
    const testing::GradcheckReport r = testing::run_model_gradcheck(m, testing::make_gradcheck_problem(m.config, seed));
    params = r.parameter_count;
    if (r.max_error() >= worst) {
      worst = r.max_error();
      where = r.worst()->loss + " / " + r.worst()->parameter;
    }
    c.check(r.entries.size() == testing::kLossTerms.size() * m.parameters().size(), "coverage");
  }
  c.check(params <= 10000, std::to_string(params) + " parameters");
  c.check(worst < 1e-4, "relative error " + fmt("%.2e", worst));
  return {c.pass(), std::to_string(params) + " parameters, 6 losses, 8 seeds, worst relative error " + fmt("%.2e", worst) +
                        " (" + where + "); " + c.summary()};
}

// ---------------------------------------------------------------------------
// Shared toy setup.

/// Desk-scale stand-in for the 64x64, 20k-iteration toy protocol.
RunConfig desk_config(const fs::path& work) {
  RunConfig c;
  c.data.image_size = 32;
  c.data.samples_per_domain = 800;
  c.data.test_per_domain = 200;
  c.model.image_size = 32;
  c.model.num_domains = 4;
  c.model.base_channels = 16;
  c.model.num_res_blocks = 3;
  c.model.discriminator_layers = 5;
  c.model.init_std = 0.06;
  c.train.batch_size = 4;
  c.train.total_iterations = 12000;
  c.train.log_every = 1;
  c.train.checkpoint_every = 4000;
  c.eval.n_samples = 10;
  c.eval.inputs_per_domain = 25;
  c.eval.reverse_train_per_domain = 200;
  c.eval.embedder = "classifier";
  c.eval.classifier.epochs = 5;
  c.output.dir = (work / "toy").string();
  c.output.sample_every = 2000;
  c.ablation.variants = {"full", "no-lat", "gamma-only", "beta-only"};
  return c;
}

std::vector<Json> logged_losses(Trainer& t) {
  std::vector<Json> out;
  t.run({[&](const TrainLogRecord& r) { out.push_back(to_json(r, false)); }, {}});
  return out;
}

// ---------------------------------------------------------------------------
// 3. Determinism and resume

Outcome determinism(const fs::path& work) {
  RunConfig cfg = desk_config(work);
  cfg.train.total_iterations = 100;
  cfg.train.checkpoint_every = 0;
  const DatasetSplit data = load_dataset(cfg.data);

  Trainer a(cfg.model, cfg.train, data.train);
  Trainer b(cfg.model, cfg.train, data.train);
  const std::vector<Json> run_a = logged_losses(a);
  const std::vector<Json> run_b = logged_losses(b);

  TrainConfig half = cfg.train;
  half.total_iterations = 50;
  Trainer first(cfg.model, half, data.train);
  logged_losses(first);
  const fs::path ckpt = work / "determinism" / "step50.ckpt";
  save_checkpoint(first.checkpoint(), ckpt);
  Checkpoint loaded = load_checkpoint(ckpt);
  loaded.train_config.total_iterations = 100;
  Trainer resumed = Trainer::resume(loaded, data.train);
  const std::vector<Json> tail = logged_losses(resumed);

  Checklist c;
  c.check(run_a.size() == 100, "100 records");
  c.check(run_a == run_b, "identical streams");
  c.check(tail.size() == 50, "50 resumed records");
  double worst = 0;
  for (std::size_t i = 0; i < tail.size() && i + 50 < run_a.size(); ++i) {
    for (const auto& item : tail[i].items()) {
      if (!item.value().is_number_float()) continue;
      worst = std::max(worst, std::abs(item.value().get<double>() - run_a[i + 50].at(item.key()).get<double>()));
    }
  }
  c.check(worst <= 1e-6, "resume gap " + fmt("%.2e", worst));
  return {c.pass(), "two 100-step runs identical: " + std::string(run_a == run_b ? "yes" : "no") +
                        "; resume at 50 max loss gap " + fmt("%.2e", worst) + "; " + c.summary()};
}

// ---------------------------------------------------------------------------
// 4. Scalability

Outcome scalability(const fs::path& work) {
  Checklist c;
  ModelConfig paper;  // 128 px, 64 base channels
  std::map<int, ParameterCounts> counts;
  for (int domains : {2, 4, 8}) {
    paper.num_domains = domains;
    counts[domains] = count_parameters(Model<float>::create(paper, 3));
  }
  const Index first_layer = Index(7) * 7 * paper.base_channels;
  const Index cls_head = Index(3) * 3 * paper.discriminator_channels(paper.discriminator_layers - 1) + 1;
  auto generator_side = [](const ParameterCounts& p) { return p.encoder + p.mapping + p.generator; };
  std::string deltas;
  for (auto [lo, hi] : {std::pair{2, 4}, std::pair{4, 8}}) {
    const Index dc = hi - lo;
    const Index dg = generator_side(counts[hi]) - generator_side(counts[lo]);
    const Index dd = counts[hi].discriminator - counts[lo].discriminator;
    c.check(dg == first_layer * dc, "generator delta C=" + std::to_string(lo) + "->" + std::to_string(hi));
    c.check(dd == cls_head * dc, "discriminator delta C=" + std::to_string(lo) + "->" + std::to_string(hi));
    deltas += " C" + std::to_string(lo) + "->" + std::to_string(hi) + ": G " + std::to_string(dg) + " = 7*7*64*" +
              std::to_string(dc) + ", D " + std::to_string(dd) + ";";
  }

  RunConfig cfg = desk_config(work);
  cfg.data.samples_per_domain = 8;
  cfg.data.test_per_domain = 2;
  cfg.train.total_iterations = 5;
  cfg.train.checkpoint_every = 0;
  cfg.output.dir = (work / "scalability").string();
  cfg.output.sample_every = 0;
  std::ostringstream log;
  const TrainResult trained = cmd_train(cfg, cfg.output.dir, log);
  TranslateRequest req;
  req.checkpoint = trained.final_checkpoint;
  req.n_samples = 3;
  req.targets = {"all"};
  for (const auto& p : fs::directory_iterator(work / "scalability")) {
    if (p.path().filename() == "translate") fs::remove_all(p.path());
  }
  const std::vector<fs::path> grids = cmd_translate(cfg, req, log);
  c.check(grids.size() == 4, std::to_string(grids.size()) + " grids");
  for (const auto& d : cfg.data.domains) {
    c.check(fs::exists(fs::path(cfg.output.dir) / "translate" / (d + ".png")), "grid " + d);
  }
  return {c.pass(), "parameter deltas" + deltas + " one checkpoint -> " + std::to_string(grids.size()) +
                        " domain grids; " + c.summary()};
}

// ---------------------------------------------------------------------------
// 5-7. Toy training and ablations

struct ToyRuns {
  AblateResult result;
  DatasetSplit data;
  std::map<std::string, EvalReport> by_name;
  std::map<std::string, fs::path> dirs;
};

ToyRuns& toy_runs(const fs::path& work) {
  static std::optional<ToyRuns> runs;
  if (!runs) {
    const RunConfig cfg = desk_config(work);
    std::ofstream log(work / "toy.log", std::ios::app);
    ToyRuns r;
    r.result = cmd_ablate(cfg, log);
    r.data = load_dataset(cfg.data);
    for (std::size_t i = 0; i < r.result.report.names.size(); ++i) {
      r.by_name[r.result.report.names[i]] = r.result.report.reports[i];
      r.dirs[r.result.report.names[i]] = r.result.variant_dirs[i];
    }
    runs = std::move(r);
  }
  return *runs;
}

/// Trailing mean of the `window` values ending at index `end` (exclusive).
double trailing_mean(const std::vector<double>& v, std::size_t end, std::size_t window) {
  double s = 0;
  for (std::size_t i = end - window; i < end; ++i) s += v[i];
  return s / double(window);
}

Outcome toy_convergence(const fs::path& work) {
  ToyRuns& runs = toy_runs(work);
  std::vector<double> cycle;
  for (const Json& j : read_metrics(runs.dirs.at("full") / "metrics.jsonl")) cycle.push_back(j.at("g_cycle"));
  Checklist c;
  const std::size_t window = 10;
  c.check(cycle.size() >= 2 * window, "metrics length");
  if (!c.pass()) return {false, c.summary()};
  const double early = trailing_mean(cycle, window, window);
  const double late = trailing_mean(cycle, cycle.size(), window);
  const double accuracy = runs.by_name.at("full").mean_accuracy;
  c.check(late <= 0.5 * early, "cycle " + fmt("%.4f", late) + " > 0.5 x " + fmt("%.4f", early));
  c.check(accuracy >= 0.90, "reverse accuracy " + fmt("%.3f", accuracy));
  return {c.pass(), "cycle moving average " + fmt("%.4f", early) + " at iteration 10 -> " + fmt("%.4f", late) +
                        " at " + std::to_string(cycle.size()) + " (ratio " + fmt("%.3f", late / early) +
                        ", need <= 0.5); reverse-classification mean accuracy " + fmt("%.3f", accuracy) +
                        " (need >= 0.90)"};
}

Outcome latent_ablation(const fs::path& work) {
  ToyRuns& runs = toy_runs(work);
  const double with = runs.by_name.at("full").mean_diversity;
  const double without = runs.by_name.at("no-lat").mean_diversity;
  const bool ok = with >= 1.10 * without;
  return {ok, "diversity with latent loss " + fmt("%.4f", with) + ", without " + fmt("%.4f", without) + " (ratio " +
                  fmt("%.3f", without > 0 ? with / without : INFINITY) + ", need >= 1.10)"};
}

Outcome beta_dominance(const fs::path& work) {
  ToyRuns& runs = toy_runs(work);
  const double gamma = runs.by_name.at("gamma-only").mean_diversity;
  const double beta = runs.by_name.at("beta-only").mean_diversity;
  const double both = runs.by_name.at("full").mean_diversity;
  Checklist c;
  c.check(beta >= 2 * gamma, "beta-only < 2 x gamma-only");
  c.check(gamma <= 0.2 * both, "gamma-only > 0.2 x both");
  return {c.pass(), "diversity gamma-only " + fmt("%.4f", gamma) + ", beta-only " + fmt("%.4f", beta) + ", both " +
                        fmt("%.4f", both) + " (beta/gamma " + fmt("%.2f", gamma > 0 ? beta / gamma : INFINITY) +
                        ", need >= 2; gamma/both " + fmt("%.3f", both > 0 ? gamma / both : INFINITY) +
                        ", need <= 0.2)"};
}

// ---------------------------------------------------------------------------
// 8. Degenerate generators

Outcome degenerate_generators(const fs::path& work) {
  RunConfig cfg = desk_config(work);
  const DatasetSplit data = load_dataset(cfg.data);
  Checklist c;

  cfg.model.cin_enabled = false;
  cfg.train.total_iterations = 20;
  Trainer t(cfg.model, cfg.train, data.train);
  t.run();
  const std::vector<LabeledSample> inputs = take_per_domain(data.test, 10);
  const Embedder raw = raw_pixel_embedder(cfg.data.image_size);
  double worst = 0;
  for (int d = 1; d <= 4; ++d) {
    const DiversityResult r =
        diversity_score(model_translator(t.model()), inputs, DomainLabel(d, 4), 10, raw, cfg.eval.seed);
    worst = std::max(worst, r.score);
  }
  c.check(worst < 1e-6, "cin-disabled diversity " + fmt("%.2e", worst));

  const std::vector<LabeledSample> train_inputs = take_per_domain(data.train, cfg.eval.reverse_train_per_domain);
  const ReverseClassificationResult collapsed = reverse_classification(
      collapsed_translator(data.train.samples.front().image), train_inputs, data.test, cfg.eval.classifier, 9);
  c.check(std::abs(collapsed.mean - 0.25) <= 0.1, "collapsed accuracy " + fmt("%.3f", collapsed.mean));
  return {c.pass(), "CIN-disabled raw-pixel diversity " + fmt("%.2e", worst) +
                        " (need < 1e-6); mode-collapsed reverse accuracy " + fmt("%.3f", collapsed.mean) +
                        " (need 0.25 +/- 0.1)"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::create_directories(work);
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // 0 = no limit checked here
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "numeric core", 60, numeric_core},
      {2, "gradient checks", 300, gradient_checks},
      {3, "determinism and resume", 600, [&] { return determinism(work); }},
      {4, "scalability", 60, [&] { return scalability(work); }},
      {5, "toy convergence", 0, [&] { return toy_convergence(work); }},
      {6, "latent loss ablation", 0, [&] { return latent_ablation(work); }},
      {7, "CIN beta dominance", 0, [&] { return beta_dominance(work); }},
      {8, "degenerate generators", 0, [&] { return degenerate_generators(work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds > c.budget_seconds) {
      o.pass = false;
      o.detail += "; took " + fmt("%.0f", seconds) + " s, budget " + fmt("%.0f", c.budget_seconds) + " s";
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, seconds,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
