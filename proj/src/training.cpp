#include "sdit/training.hpp"

#include <chrono>
#include <sstream>

namespace sdit {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) { return make_rng(seed, stream)(); }

void check_finite(const LossBundle& b, std::int64_t iteration, const std::string& last_ckpt,
                  const char* step) {
  if (b.all_finite()) return;
  throw NumericError(std::string("non-finite loss in ") + step + " at iteration " +
                     std::to_string(iteration) + "; last good checkpoint: " +
                     (last_ckpt.empty() ? "none" : last_ckpt));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (total_iterations < 0) throw ConfigError("train: total_iterations must be >= 0");
  if (d_steps_per_g_step < 1) throw ConfigError("train: d_steps_per_g_step must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
  weights.validate();
}

Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"batch_size", c.batch_size},
              {"total_iterations", c.total_iterations},
              {"d_steps_per_g_step", c.d_steps_per_g_step},
              {"weights", to_json(c.weights)},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every}};
}

void read_json(const Json& j, TrainConfig& c, const std::string& section) {
  using detail::read_key;
  detail::reject_unknown_keys(j,
                              {"learning_rate", "adam_beta1", "adam_beta2", "batch_size",
                               "total_iterations", "d_steps_per_g_step", "weights", "seed",
                               "checkpoint_every", "log_every"},
                              section);
  read_key(j, "learning_rate", c.learning_rate, section);
  read_key(j, "adam_beta1", c.adam_beta1, section);
  read_key(j, "adam_beta2", c.adam_beta2, section);
  read_key(j, "batch_size", c.batch_size, section);
  read_key(j, "total_iterations", c.total_iterations, section);
  read_key(j, "d_steps_per_g_step", c.d_steps_per_g_step, section);
  if (j.contains("weights")) read_json(j.at("weights"), c.weights, section + ".weights");
  read_key(j, "seed", c.seed, section);
  read_key(j, "checkpoint_every", c.checkpoint_every, section);
  read_key(j, "log_every", c.log_every, section);
}

Json to_json(const TrainLogRecord& r, bool include_time) {
  Json j{{"iteration", r.iteration},
         {"d_gan", r.d.gan},
         {"d_cls_real", r.d.cls_real},
         {"d_latent", r.d.latent},
         {"d_total", r.d.total_d},
         {"g_gan", r.g.gan},
         {"g_cls_fake", r.g.cls_fake},
         {"g_latent", r.g.latent},
         {"g_cycle", r.g.cycle},
         {"g_total", r.g.total_g}};
  if (include_time) j["wall_seconds"] = r.wall_seconds;
  return j;
}

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data)
    : Trainer(model_cfg, train_cfg, data, true) {}

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data,
                 bool initialize)
    : train_cfg_(train_cfg),
      data_(&data),
      batches_(data, train_cfg.batch_size, derive_seed(train_cfg.seed, 1), true),
      rng_(make_rng(train_cfg.seed, 2)) {
  train_cfg.validate();
  model_cfg.validate();
  if (data.num_domains() != model_cfg.num_domains) {
    throw ConfigError("dataset has " + std::to_string(data.num_domains()) +
                      " domains, model expects " + std::to_string(model_cfg.num_domains));
  }
  if (data.image_size != model_cfg.image_size) {
    throw ConfigError("dataset image size " + std::to_string(data.image_size) +
                      " differs from model image_size " + std::to_string(model_cfg.image_size));
  }
  if (initialize) {
    model_ = std::make_unique<Model<float>>(Model<float>::create(model_cfg, derive_seed(train_cfg.seed, 0)));
  } else {
    model_ = std::make_unique<Model<float>>();
    model_->config = model_cfg;
  }
  g_opt_ = Adam<float>(model_->parameters(ParamGroup::generator), train_cfg.adam());
  d_opt_ = Adam<float>(model_->parameters(ParamGroup::discriminator), train_cfg.adam());
}

Trainer Trainer::resume(const Checkpoint& ckpt, const Dataset& data) {
  Trainer t(ckpt.model_config, ckpt.train_config, data, false);
  *t.model_ = restore_model(ckpt);
  t.g_opt_ = Adam<float>(t.model_->parameters(ParamGroup::generator), ckpt.train_config.adam());
  t.d_opt_ = Adam<float>(t.model_->parameters(ParamGroup::discriminator), ckpt.train_config.adam());
  auto load_opt = [](Adam<float>& opt, const OptimizerState& s) {
    if (s.first.size() != opt.first_moments().size() || s.second.size() != opt.second_moments().size()) {
      throw IntegrityError("checkpoint optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < s.first.size(); ++i) {
      if (!(s.first[i].shape == opt.first_moments()[i].shape) ||
          !(s.second[i].shape == opt.second_moments()[i].shape)) {
        throw IntegrityError("checkpoint optimizer moment shape mismatch");
      }
      opt.first_moments()[i] = s.first[i];
      opt.second_moments()[i] = s.second[i];
    }
    opt.set_steps(s.steps);
  };
  load_opt(t.g_opt_, ckpt.generator_optimizer);
  load_opt(t.d_opt_, ckpt.discriminator_optimizer);
  std::istringstream rs(ckpt.rng_state);
  rs >> t.rng_;
  if (!rs) throw IntegrityError("checkpoint RNG state is unreadable");
  t.batches_.restore(ckpt.iterator);
  t.iteration_ = ckpt.iteration;
  return t;
}

LossBundle Trainer::step_d(const Batch& batch) {
  const Model<float>& m = *model_;
  const ModelConfig& mc = m.config;
  const Index n = batch.images.shape.n;
  Tensor<float> z = sample_latent<float>(n, mc.latent_dim, rng_);
  const std::vector<DomainLabel> target = sample_target_labels(batch.labels, mc.num_domains, rng_);
  const Tensor<float> fake_images = generate(m, batch.images, target, z);

  d_opt_.zero_grad();
  Graph<float> g(static_cast<unsigned>(ParamGroup::discriminator));
  auto real = discriminate(m, g.constant(batch.images));
  auto fake = discriminate(m, g.constant(fake_images));
  Var<float> gan = adversarial_d_loss(real.src_logits, fake.src_logits, mc.gan_loss);
  Var<float> cls = cls_real_loss(real.cls_logits, batch.labels);
  Var<float> lat = latent_rec_loss(fake.rec_code, g.constant(z));
  Var<float> total = discriminator_objective(gan, cls, lat, train_cfg_.weights);

  LossBundle b;
  b.gan = scalar_value(gan);
  b.cls_real = scalar_value(cls);
  b.latent = scalar_value(lat);
  b.total_d = scalar_value(total);
  check_finite(b, iteration_ + 1, last_checkpoint_, "discriminator step");
  g.backward(total);
  d_opt_.step();
  return b;
}

LossBundle Trainer::step_g(const Batch& batch) {
  const Model<float>& m = *model_;
  const ModelConfig& mc = m.config;
  const Index n = batch.images.shape.n;
  Tensor<float> z_value = sample_latent<float>(n, mc.latent_dim, rng_);
  const std::vector<DomainLabel> target = sample_target_labels(batch.labels, mc.num_domains, rng_);

  g_opt_.zero_grad();
  Graph<float> g(static_cast<unsigned>(ParamGroup::generator));
  Var<float> x = g.constant(batch.images);
  Var<float> z = g.constant(std::move(z_value));
  Var<float> y = generate(m, x, target, z);
  Var<float> x_rec = generate(m, y, batch.labels, z);
  auto fake = discriminate(m, y);
  Var<float> gan = adversarial_g_loss(fake.src_logits, mc.gan_loss);
  Var<float> cls = cls_fake_loss(fake.cls_logits, target);
  Var<float> lat = latent_rec_loss(fake.rec_code, z);
  Var<float> cyc = cycle_loss(x, x_rec);
  Var<float> total = generator_objective(gan, cls, lat, cyc, train_cfg_.weights);

  LossBundle b;
  b.gan = scalar_value(gan);
  b.cls_fake = scalar_value(cls);
  b.latent = scalar_value(lat);
  b.cycle = scalar_value(cyc);
  b.total_g = scalar_value(total);
  check_finite(b, iteration_ + 1, last_checkpoint_, "generator step");
  g.backward(total);
  g_opt_.step();
  return b;
}

TrainLogRecord Trainer::iterate() {
  const auto start = std::chrono::steady_clock::now();
  const Batch batch = batches_.next();
  TrainLogRecord r;
  try {
    for (int k = 0; k < train_cfg_.d_steps_per_g_step; ++k) r.d = step_d(batch);
    r.g = step_g(batch);
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    if (msg.find("last good checkpoint") != std::string::npos) throw;
    throw NumericError(msg + " (iteration " + std::to_string(iteration_ + 1) +
                       "; last good checkpoint: " + (last_checkpoint_.empty() ? "none" : last_checkpoint_) + ")");
  }
  ++iteration_;
  r.iteration = iteration_;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Checkpoint Trainer::run(const TrainCallbacks& callbacks) {
  while (iteration_ < train_cfg_.total_iterations) {
    TrainLogRecord r = iterate();
    if (callbacks.on_log && r.iteration % train_cfg_.log_every == 0) callbacks.on_log(r);
    const bool periodic = train_cfg_.checkpoint_every > 0 && r.iteration % train_cfg_.checkpoint_every == 0 &&
                          r.iteration != train_cfg_.total_iterations;
    if (periodic && callbacks.on_checkpoint) {
      std::string path = callbacks.on_checkpoint(checkpoint());
      if (!path.empty()) last_checkpoint_ = std::move(path);
    }
  }
  Checkpoint final_ckpt = checkpoint();
  if (callbacks.on_checkpoint) {
    std::string path = callbacks.on_checkpoint(final_ckpt);
    if (!path.empty()) last_checkpoint_ = std::move(path);
  }
  return final_ckpt;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model_config = model_->config;
  c.train_config = train_cfg_;
  c.domains = data_->domains;
  c.iteration = iteration_;
  for (const Parameter<float>* p : model_->parameters()) {
    c.parameter_names.push_back(p->name);
    c.parameters.push_back(p->value);
  }
  c.generator_optimizer = {g_opt_.steps(), g_opt_.first_moments(), g_opt_.second_moments()};
  c.discriminator_optimizer = {d_opt_.steps(), d_opt_.first_moments(), d_opt_.second_moments()};
  std::ostringstream rs;
  rs << rng_;
  c.rng_state = rs.str();
  c.iterator = batches_.state();
  return c;
}

Model<float> restore_model(const Checkpoint& ckpt) {
  Model<float> m = Model<float>::create(ckpt.model_config, 0);
  auto params = m.parameters();
  if (params.size() != ckpt.parameters.size() || params.size() != ckpt.parameter_names.size()) {
    throw IntegrityError("checkpoint holds " + std::to_string(ckpt.parameters.size()) +
                         " parameter tensors, model needs " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != ckpt.parameter_names[i] || !(params[i]->value.shape == ckpt.parameters[i].shape)) {
      throw IntegrityError("checkpoint parameter " + ckpt.parameter_names[i] + " does not match model parameter " +
                           params[i]->name);
    }
    params[i]->value = ckpt.parameters[i];
  }
  return m;
}

Checkpoint train_loop(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                      const TrainCallbacks& callbacks) {
  Trainer t(model_cfg, train_cfg, data);
  return t.run(callbacks);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw DataError("cannot open metrics file " + path.string());
}

void MetricsWriter::write(const Json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
}

}  // namespace sdit
