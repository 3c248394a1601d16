#ifndef SDIT_MODEL_HPP
#define SDIT_MODEL_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdit/labels.hpp"
#include "sdit/losses.hpp"
#include "sdit/ops.hpp"

// Encoder E, mapping network M, attention-gated generator G and the
// three-headed discriminator D, as pure functions of (inputs, parameters).

namespace sdit {

struct ModelConfig {
  int image_size = 128;
  int num_domains = 4;
  int latent_dim = 8;
  int base_channels = 64;
  int num_res_blocks = 6;
  int encoder_downsamples = 2;
  int discriminator_layers = 6;
  int discriminator_max_channels = 0;  // 0 = keep doubling
  int attention_blocks = 1;
  int cin_sites_per_block = 1;
  int mapping_hidden = 256;
  int mapping_output_width = 0;  // 0 = derived from the CIN layout
  GanLossVariant gan_loss = GanLossVariant::vanilla;
  bool attention_enabled = true;
  bool cin_enabled = true;
  bool cin_gamma_learnable = true;
  bool cin_beta_learnable = true;
  double init_std = 0.02;

  int bottleneck_channels() const { return base_channels << encoder_downsamples; }
  int bottleneck_size() const { return image_size >> encoder_downsamples; }
  int cin_site_count() const { return cin_enabled ? num_res_blocks * cin_sites_per_block : 0; }
  /// Scalars needed for one (gamma, beta) pair per CIN site.
  int cin_parameter_count() const { return 2 * cin_site_count() * bottleneck_channels(); }
  int discriminator_channels(int layer) const {
    long c = static_cast<long>(base_channels) << layer;
    if (discriminator_max_channels > 0 && c > discriminator_max_channels) {
      c = discriminator_max_channels;
    }
    return static_cast<int>(c);
  }
  int patch_grid_size() const { return image_size >> discriminator_layers; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
    if (num_domains < 1) fail("num_domains must be >= 1");
    if (latent_dim < 1) fail("latent_dim must be >= 1");
    if (base_channels < 1) fail("base_channels must be >= 1");
    if (num_res_blocks < 1) fail("num_res_blocks must be >= 1");
    if (encoder_downsamples < 1) fail("encoder_downsamples must be >= 1");
    if (discriminator_layers < 1) fail("discriminator_layers must be >= 1");
    if (attention_blocks < 1) fail("attention_blocks must be >= 1");
    if (cin_sites_per_block < 1 || cin_sites_per_block > 2) fail("cin_sites_per_block must be 1 or 2");
    if (mapping_hidden < 1) fail("mapping_hidden must be >= 1");
    if (init_std <= 0) fail("init_std must be positive");
    if (image_size < 1 || image_size % (1 << encoder_downsamples) != 0) {
      fail("image_size must be divisible by 2^encoder_downsamples");
    }
    if (image_size % (1 << discriminator_layers) != 0) {
      fail("image_size must be divisible by 2^discriminator_layers");
    }
    if (cin_enabled && mapping_output_width != 0 && mapping_output_width != cin_parameter_count()) {
      fail("mapping output width " + std::to_string(mapping_output_width) +
           " does not match the generator's CIN parameter count " +
           std::to_string(cin_parameter_count()));
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename Scalar>
struct ConvLayer {
  Parameter<Scalar> weight;
  std::optional<Parameter<Scalar>> bias;
  ConvGeometry geom;
  bool transposed = false;
};

template <typename Scalar>
struct LinearLayer {
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

template <typename Scalar>
struct ResidualBlock {
  ConvLayer<Scalar> first;
  ConvLayer<Scalar> second;
};

template <typename Scalar>
struct Encoder {
  ConvLayer<Scalar> stem;
  std::vector<ConvLayer<Scalar>> down;
  std::vector<ResidualBlock<Scalar>> blocks;
};

template <typename Scalar>
struct MappingNetwork {
  std::optional<LinearLayer<Scalar>> hidden;
  std::optional<LinearLayer<Scalar>> out;
};

template <typename Scalar>
struct Generator {
  std::vector<ResidualBlock<Scalar>> cin_blocks;
  std::vector<ResidualBlock<Scalar>> attention_blocks;
  ConvLayer<Scalar> attention_head;
  std::vector<ConvLayer<Scalar>> up;
  ConvLayer<Scalar> out;
};

template <typename Scalar>
struct Discriminator {
  std::vector<ConvLayer<Scalar>> trunk;
  ConvLayer<Scalar> src_head;
  ConvLayer<Scalar> cls_head;
  ConvLayer<Scalar> rec_head;
  LinearLayer<Scalar> rec_fc;
};

/// Per-site CIN affine parameters, each (n, 1, 1, channels).
template <typename Scalar>
struct CINAffines {
  std::vector<Var<Scalar>> gamma;
  std::vector<Var<Scalar>> beta;
  std::size_t site_count() const { return gamma.size(); }
};

/// Value-level CIN affine set.
template <typename Scalar>
struct CINAffineSet {
  std::vector<Tensor<Scalar>> gamma;
  std::vector<Tensor<Scalar>> beta;
  std::size_t site_count() const { return gamma.size(); }
  Index scalar_count() const {
    Index total = 0;
    for (std::size_t i = 0; i < gamma.size(); ++i) total += gamma[i].shape.c + beta[i].shape.c;
    return total;
  }
};

template <typename T>
struct DiscriminatorHeads {
  T src_logits;  // (n, g, g, 1) patch grid
  T cls_logits;  // (n, 1, 1, C)
  T rec_code;    // (n, 1, 1, Z)
};

struct ParameterCounts {
  Index encoder = 0;
  Index mapping = 0;
  Index generator = 0;
  Index discriminator = 0;

  Index generator_side() const { return encoder + mapping + generator; }
  Index total() const { return generator_side() + discriminator; }
};

template <typename Scalar>
class Model {
 public:
  ModelConfig config;
  Encoder<Scalar> encoder;
  MappingNetwork<Scalar> mapping;
  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;

  Model() = default;

  /// Builds every network for `cfg` with N(0, init_std) weights and zero biases.
  static Model create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.config = cfg;
    m.build();
    m.initialize(seed);
    return m;
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    visit([&](Parameter<Scalar>& p) { out.push_back(&p); });
    return out;
  }
  std::vector<const Parameter<Scalar>*> parameters() const {
    std::vector<const Parameter<Scalar>*> out;
    const_cast<Model*>(this)->visit([&](Parameter<Scalar>& p) { out.push_back(&p); });
    return out;
  }
  std::vector<Parameter<Scalar>*> parameters(ParamGroup group) {
    std::vector<Parameter<Scalar>*> out;
    visit([&](Parameter<Scalar>& p) {
      if (p.group == group) out.push_back(&p);
    });
    return out;
  }

  bool empty() const { return encoder.down.empty(); }

  void zero_grad() const {
    for (const Parameter<Scalar>* p : parameters()) p->zero_grad();
  }

  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, config.init_std);
    visit([&](Parameter<Scalar>& p) {
      const bool is_bias = p.name.size() >= 4 && p.name.compare(p.name.size() - 4, 4, "bias") == 0;
      if (is_bias) {
        p.value.data.setZero();
      } else {
        for (Index i = 0; i < p.value.size(); ++i) p.value.flat()(i) = Scalar(normal(rng));
      }
      p.grad = Tensor<Scalar>(p.value.shape);
    });
  }

  /// Visits parameters in a fixed order: encoder, mapping, generator,
  /// discriminator. Checkpoints rely on this order.
  template <typename F>
  void visit(F&& f) {
    auto conv = [&](ConvLayer<Scalar>& c) {
      f(c.weight);
      if (c.bias) f(*c.bias);
    };
    auto block = [&](ResidualBlock<Scalar>& b) {
      conv(b.first);
      conv(b.second);
    };
    auto lin = [&](LinearLayer<Scalar>& l) {
      f(l.weight);
      f(l.bias);
    };
    if (empty()) return;
    conv(encoder.stem);
    for (auto& c : encoder.down) conv(c);
    for (auto& b : encoder.blocks) block(b);
    if (mapping.hidden) lin(*mapping.hidden);
    if (mapping.out) lin(*mapping.out);
    for (auto& b : generator.cin_blocks) block(b);
    for (auto& b : generator.attention_blocks) block(b);
    conv(generator.attention_head);
    for (auto& c : generator.up) conv(c);
    conv(generator.out);
    for (auto& c : discriminator.trunk) conv(c);
    conv(discriminator.src_head);
    conv(discriminator.cls_head);
    conv(discriminator.rec_head);
    lin(discriminator.rec_fc);
  }

 private:
  static ConvLayer<Scalar> make_conv(const std::string& name, ParamGroup group, int in, int out,
                                     ConvGeometry geom, bool bias) {
    ConvLayer<Scalar> c;
    const Index k2 = geom.kernel * geom.kernel;
    c.weight = Parameter<Scalar>(name + ".weight", group, Shape{1, 1, k2 * in, out});
    if (bias) c.bias = Parameter<Scalar>(name + ".bias", group, Shape{1, 1, 1, out});
    c.geom = geom;
    return c;
  }

  static ConvLayer<Scalar> make_deconv(const std::string& name, ParamGroup group, int in, int out,
                                       ConvGeometry geom) {
    ConvLayer<Scalar> c;
    const Index k2 = geom.kernel * geom.kernel;
    c.weight = Parameter<Scalar>(name + ".weight", group, Shape{1, 1, in, k2 * out});
    c.bias = Parameter<Scalar>(name + ".bias", group, Shape{1, 1, 1, out});
    c.geom = geom;
    c.transposed = true;
    return c;
  }

  static LinearLayer<Scalar> make_linear(const std::string& name, ParamGroup group, int in,
                                         int out) {
    return {Parameter<Scalar>(name + ".weight", group, Shape{1, 1, in, out}),
            Parameter<Scalar>(name + ".bias", group, Shape{1, 1, 1, out})};
  }

  static ResidualBlock<Scalar> make_block(const std::string& name, int channels) {
    const ConvGeometry g3{3, 1, 1};
    return {make_conv(name + ".conv1", ParamGroup::generator, channels, channels, g3, false),
            make_conv(name + ".conv2", ParamGroup::generator, channels, channels, g3, false)};
  }

  void build() {
    const ModelConfig& c = config;
    const ParamGroup gen = ParamGroup::generator;
    const ParamGroup dis = ParamGroup::discriminator;
    const ConvGeometry down_geom{4, 2, 1};
    const int bc = c.bottleneck_channels();

    encoder.stem = make_conv("encoder.stem", gen, 3 + c.num_domains, c.base_channels,
                             ConvGeometry{7, 1, 3}, false);
    for (int i = 0; i < c.encoder_downsamples; ++i) {
      encoder.down.push_back(make_conv("encoder.down" + std::to_string(i), gen,
                                       c.base_channels << i, c.base_channels << (i + 1),
                                       down_geom, false));
    }
    for (int i = 0; i < c.num_res_blocks; ++i) {
      encoder.blocks.push_back(make_block("encoder.block" + std::to_string(i), bc));
    }

    if (c.cin_enabled) {
      mapping.hidden = make_linear("mapping.hidden", gen, c.latent_dim, c.mapping_hidden);
      mapping.out = make_linear("mapping.out", gen, c.mapping_hidden, c.cin_parameter_count());
    }

    for (int i = 0; i < c.num_res_blocks; ++i) {
      generator.cin_blocks.push_back(make_block("generator.cin_block" + std::to_string(i), bc));
    }
    for (int i = 0; i < c.attention_blocks; ++i) {
      generator.attention_blocks.push_back(
          make_block("generator.attention_block" + std::to_string(i), bc));
    }
    generator.attention_head =
        make_conv("generator.attention_head", gen, bc, bc, ConvGeometry{1, 1, 0}, true);
    for (int i = c.encoder_downsamples; i > 0; --i) {
      generator.up.push_back(make_deconv("generator.up" + std::to_string(c.encoder_downsamples - i),
                                         gen, c.base_channels << i, c.base_channels << (i - 1),
                                         down_geom));
    }
    generator.out =
        make_conv("generator.out", gen, c.base_channels, 3, ConvGeometry{7, 1, 3}, true);

    int in = 3;
    for (int i = 0; i < c.discriminator_layers; ++i) {
      const int out = c.discriminator_channels(i);
      discriminator.trunk.push_back(
          make_conv("discriminator.trunk" + std::to_string(i), dis, in, out, down_geom, true));
      in = out;
    }
    const ConvGeometry g3{3, 1, 1};
    discriminator.src_head = make_conv("discriminator.src_head", dis, in, 1, g3, true);
    discriminator.cls_head =
        make_conv("discriminator.cls_head", dis, in, c.num_domains, g3, true);
    discriminator.rec_head = make_conv("discriminator.rec_head", dis, in, c.latent_dim, g3, true);
    const int grid = c.patch_grid_size();
    discriminator.rec_fc = make_linear("discriminator.rec_fc", dis,
                                       grid * grid * c.latent_dim, c.latent_dim);
  }
};

template <typename Scalar>
ParameterCounts count_parameters(const Model<Scalar>& m) {
  if (m.empty()) throw ConfigError("count_parameters: model has no networks");
  ParameterCounts counts;
  for (const Parameter<Scalar>* p : m.parameters()) {
    const Index n = p->value.size();
    if (p->name.rfind("encoder.", 0) == 0) {
      counts.encoder += n;
    } else if (p->name.rfind("mapping.", 0) == 0) {
      counts.mapping += n;
    } else if (p->name.rfind("generator.", 0) == 0) {
      counts.generator += n;
    } else {
      counts.discriminator += n;
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Graph-level forward passes.

template <typename Scalar>
Var<Scalar> apply(const ConvLayer<Scalar>& layer, Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  std::optional<Var<Scalar>> b;
  if (layer.bias) b = g.param(*layer.bias);
  if (layer.transposed) return conv_transpose2d(x, g.param(layer.weight), b, layer.geom);
  return conv2d(x, g.param(layer.weight), b, layer.geom);
}

template <typename Scalar>
Var<Scalar> apply(const LinearLayer<Scalar>& layer, Var<Scalar> x) {
  Graph<Scalar>& g = *x.graph;
  return linear(x, g.param(layer.weight), std::optional<Var<Scalar>>(g.param(layer.bias)));
}

/// Conditional instance normalization:
/// gamma * (e - mean(e)) / std(e) + beta, per sample and channel.
template <typename Scalar>
Var<Scalar> cin(Var<Scalar> e, Var<Scalar> gamma, Var<Scalar> beta) {
  if (!e.value().all_finite()) throw NumericError("cin: non-finite feature map");
  const Shape s = e.shape();
  if (gamma.shape().c != s.c || beta.shape().c != s.c) {
    throw DomainError("cin: affine length does not match channel count");
  }
  return channel_affine(instance_norm(e), gamma, beta);
}

template <typename Scalar>
Var<Scalar> residual_block(const ResidualBlock<Scalar>& b, Var<Scalar> x) {
  Var<Scalar> h = relu(instance_norm(apply(b.first, x)));
  return x + instance_norm(apply(b.second, h));
}

/// Residual block whose normalizations are CIN layers at sites
/// [site, site + sites_per_block); the remaining one is plain IN.
template <typename Scalar>
Var<Scalar> cin_residual_block(const ResidualBlock<Scalar>& b, Var<Scalar> x,
                               const CINAffines<Scalar>& affines, std::size_t site,
                               int sites_per_block) {
  Var<Scalar> h = relu(cin(apply(b.first, x), affines.gamma[site], affines.beta[site]));
  Var<Scalar> y = apply(b.second, h);
  y = sites_per_block == 2 ? cin(y, affines.gamma[site + 1], affines.beta[site + 1])
                           : instance_norm(y);
  return x + y;
}

template <typename Scalar>
void check_image_input(const ModelConfig& cfg, const Shape& s, const char* what) {
  if (s.h != cfg.image_size || s.w != cfg.image_size || s.c != 3) {
    throw ConfigError(std::string(what) + ": expected images of " +
                      std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size) +
                      "x3, got " + to_string(s));
  }
}

/// e = E(x, l_tg). The target label is broadcast to C spatial planes and
/// concatenated with the image channels before the first convolution.
template <typename Scalar>
Var<Scalar> encode(const Model<Scalar>& m, Var<Scalar> x, std::span<const DomainLabel> target) {
  const ModelConfig& cfg = m.config;
  const Shape s = x.shape();
  check_image_input<Scalar>(cfg, s, "encode");
  if (static_cast<Index>(target.size()) != s.n) throw DomainError("encode: one label per image");
  Graph<Scalar>& g = *x.graph;
  Var<Scalar> planes = g.constant(label_planes<Scalar>(target, cfg.num_domains, s.h, s.w));
  Var<Scalar> h = relu(instance_norm(apply(m.encoder.stem, concat_channels(x, planes))));
  for (const auto& c : m.encoder.down) h = relu(instance_norm(apply(c, h)));
  for (const auto& b : m.encoder.blocks) h = residual_block(b, h);
  return h;
}

/// M(z) split into per-site (gamma, beta). Non-learnable halves are replaced
/// by the identity affine (gamma = 1, beta = 0).
template <typename Scalar>
CINAffines<Scalar> map_latent(const Model<Scalar>& m, Var<Scalar> z) {
  const ModelConfig& cfg = m.config;
  const Shape s = z.shape();
  if (s.h != 1 || s.w != 1 || s.c != cfg.latent_dim) {
    throw DomainError("map_latent: latent code must have " + std::to_string(cfg.latent_dim) +
                      " dimensions, got " + to_string(s));
  }
  CINAffines<Scalar> out;
  if (!cfg.cin_enabled) return out;
  Graph<Scalar>& g = *z.graph;
  Var<Scalar> params = apply(*m.mapping.out, relu(apply(*m.mapping.hidden, z)));
  const Index ch = cfg.bottleneck_channels();
  if (params.shape().c != cfg.cin_parameter_count()) {
    throw ConfigError("map_latent: mapping output width does not match CIN layout");
  }
  const Shape ps{s.n, 1, 1, ch};
  for (int site = 0; site < cfg.cin_site_count(); ++site) {
    const Index base = 2 * site * ch;
    out.gamma.push_back(cfg.cin_gamma_learnable ? slice_channels(params, base, ch)
                                                : g.constant(Tensor<Scalar>::constant(ps, 1)));
    out.beta.push_back(cfg.cin_beta_learnable ? slice_channels(params, base + ch, ch)
                                              : g.constant(Tensor<Scalar>::constant(ps, 0)));
  }
  return out;
}

/// a = T^a(e): residual block(s), 1x1 convolution and a sigmoid.
template <typename Scalar>
Var<Scalar> attention_branch(const Model<Scalar>& m, Var<Scalar> e) {
  Var<Scalar> h = e;
  for (const auto& b : m.generator.attention_blocks) h = residual_block(b, h);
  return sigmoid(apply(m.generator.attention_head, h));
}

/// f = T^c(e, M(z)). Without CIN the blocks use plain instance norm and the
/// affines are ignored.
template <typename Scalar>
Var<Scalar> cin_branch(const Model<Scalar>& m, Var<Scalar> e, const CINAffines<Scalar>& affines) {
  const ModelConfig& cfg = m.config;
  Var<Scalar> h = e;
  if (!cfg.cin_enabled) {
    for (const auto& b : m.generator.cin_blocks) h = residual_block(b, h);
    return h;
  }
  if (static_cast<int>(affines.site_count()) != cfg.cin_site_count()) {
    throw ConfigError("cin_branch: " + std::to_string(affines.site_count()) +
                      " affine sites supplied, branch has " +
                      std::to_string(cfg.cin_site_count()));
  }
  std::size_t site = 0;
  for (const auto& b : m.generator.cin_blocks) {
    h = cin_residual_block(b, h, affines, site, cfg.cin_sites_per_block);
    site += static_cast<std::size_t>(cfg.cin_sites_per_block);
  }
  return h;
}

/// Upsampling stages and a tanh output layer.
template <typename Scalar>
Var<Scalar> decode(const Model<Scalar>& m, Var<Scalar> h) {
  const ModelConfig& cfg = m.config;
  const Shape s = h.shape();
  if (s.h != cfg.bottleneck_size() || s.w != cfg.bottleneck_size() ||
      s.c != cfg.bottleneck_channels()) {
    throw DomainError("decode: expected bottleneck features, got " + to_string(s));
  }
  for (const auto& c : m.generator.up) h = relu(apply(c, h));
  return tanh(apply(m.generator.out, h));
}

/// Intermediate tensors of one generator pass.
template <typename Scalar>
struct GeneratorTrace {
  Var<Scalar> features;   // e
  Var<Scalar> attention;  // a (equal to e's shape); unset when attention is disabled
  Var<Scalar> edited;     // f
  Var<Scalar> blended;    // h
  Var<Scalar> image;      // y
  bool has_attention = false;
};

template <typename Scalar>
GeneratorTrace<Scalar> generate_trace(const Model<Scalar>& m, Var<Scalar> x,
                                      std::span<const DomainLabel> target, Var<Scalar> z) {
  if (z.shape().n != x.shape().n) throw DomainError("generate: one latent code per image");
  GeneratorTrace<Scalar> t;
  t.features = encode(m, x, target);
  t.edited = cin_branch(m, t.features, map_latent(m, z));
  if (m.config.attention_enabled) {
    t.attention = attention_branch(m, t.features);
    t.blended = blend(t.features, t.attention, t.edited);
    t.has_attention = true;
  } else {
    t.blended = t.edited;
  }
  t.image = decode(m, t.blended);
  return t;
}

/// y = G(E(x, l_tg), M(z)).
template <typename Scalar>
Var<Scalar> generate(const Model<Scalar>& m, Var<Scalar> x, std::span<const DomainLabel> target,
                     Var<Scalar> z) {
  return generate_trace(m, x, target, z).image;
}

template <typename Scalar>
DiscriminatorHeads<Var<Scalar>> discriminate(const Model<Scalar>& m, Var<Scalar> img) {
  check_image_input<Scalar>(m.config, img.shape(), "discriminate");
  const Scalar slope = Scalar(0.01);
  Var<Scalar> h = img;
  for (const auto& c : m.discriminator.trunk) h = leaky_relu(apply(c, h), slope);
  DiscriminatorHeads<Var<Scalar>> out;
  out.src_logits = apply(m.discriminator.src_head, h);
  out.cls_logits = mean_spatial(apply(m.discriminator.cls_head, h));
  out.rec_code = apply(m.discriminator.rec_fc, flatten(apply(m.discriminator.rec_head, h)));
  return out;
}

// ---------------------------------------------------------------------------
// Value-level wrappers: evaluate on a gradient-free graph.

template <typename Scalar>
Tensor<Scalar> encode(const Model<Scalar>& m, const Tensor<Scalar>& x,
                      std::span<const DomainLabel> target) {
  Graph<Scalar> g(groups_none);
  return encode(m, g.constant(x), target).value();
}

template <typename Scalar>
CINAffineSet<Scalar> map_latent(const Model<Scalar>& m, const Tensor<Scalar>& z) {
  Graph<Scalar> g(groups_none);
  CINAffines<Scalar> a = map_latent(m, g.constant(z));
  CINAffineSet<Scalar> out;
  for (std::size_t i = 0; i < a.site_count(); ++i) {
    out.gamma.push_back(a.gamma[i].value());
    out.beta.push_back(a.beta[i].value());
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> cin(const Tensor<Scalar>& e, const Tensor<Scalar>& gamma,
                   const Tensor<Scalar>& beta) {
  Graph<Scalar> g(groups_none);
  return cin(g.constant(e), g.constant(gamma), g.constant(beta)).value();
}

template <typename Scalar>
Tensor<Scalar> attention_branch(const Model<Scalar>& m, const Tensor<Scalar>& e) {
  Graph<Scalar> g(groups_none);
  return attention_branch(m, g.constant(e)).value();
}

template <typename Scalar>
Tensor<Scalar> cin_branch(const Model<Scalar>& m, const Tensor<Scalar>& e,
                          const CINAffineSet<Scalar>& affines) {
  Graph<Scalar> g(groups_none);
  CINAffines<Scalar> a;
  for (std::size_t i = 0; i < affines.site_count(); ++i) {
    a.gamma.push_back(g.constant(affines.gamma[i]));
    a.beta.push_back(g.constant(affines.beta[i]));
  }
  return cin_branch(m, g.constant(e), a).value();
}

template <typename Scalar>
Tensor<Scalar> blend(const Tensor<Scalar>& e, const Tensor<Scalar>& a, const Tensor<Scalar>& f) {
  Graph<Scalar> g(groups_none);
  return blend(g.constant(e), g.constant(a), g.constant(f)).value();
}

template <typename Scalar>
Tensor<Scalar> decode(const Model<Scalar>& m, const Tensor<Scalar>& h) {
  Graph<Scalar> g(groups_none);
  return decode(m, g.constant(h)).value();
}

template <typename Scalar>
Tensor<Scalar> generate(const Model<Scalar>& m, const Tensor<Scalar>& x,
                        std::span<const DomainLabel> target, const Tensor<Scalar>& z) {
  Graph<Scalar> g(groups_none);
  return generate(m, g.constant(x), target, g.constant(z)).value();
}

template <typename Scalar>
DiscriminatorHeads<Tensor<Scalar>> discriminate(const Model<Scalar>& m, const Tensor<Scalar>& img) {
  Graph<Scalar> g(groups_none);
  auto h = discriminate(m, g.constant(img));
  return {h.src_logits.value(), h.cls_logits.value(), h.rec_code.value()};
}

/// Draws n latent codes with i.i.d. N(0, 1) components.
template <typename Scalar, typename Rng>
Tensor<Scalar> sample_latent(Index n, int latent_dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<Scalar> z(Shape{n, 1, 1, latent_dim});
  for (Index i = 0; i < z.size(); ++i) z.flat()(i) = Scalar(normal(rng));
  return z;
}

}  // namespace sdit

#endif  // SDIT_MODEL_HPP
