#ifndef SDIT_SERIALIZATION_HPP
#define SDIT_SERIALIZATION_HPP

#include <json.hpp>

#include <initializer_list>
#include <string>

#include "sdit/data.hpp"
#include "sdit/losses.hpp"
#include "sdit/model.hpp"

// JSON mappings for configuration structs. Readers start from the struct's
// current (default) values, overwrite the keys present and reject unknown
// keys, so partial documents are valid.

namespace sdit {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                                const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected a mapping");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(section + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_key(const Json& j, const char* key, T& out, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline Json to_json(const ModelConfig& c) {
  return Json{{"image_size", c.image_size},
              {"num_domains", c.num_domains},
              {"latent_dim", c.latent_dim},
              {"base_channels", c.base_channels},
              {"num_res_blocks", c.num_res_blocks},
              {"encoder_downsamples", c.encoder_downsamples},
              {"discriminator_layers", c.discriminator_layers},
              {"discriminator_max_channels", c.discriminator_max_channels},
              {"attention_blocks", c.attention_blocks},
              {"cin_sites_per_block", c.cin_sites_per_block},
              {"mapping_hidden", c.mapping_hidden},
              {"mapping_output_width", c.mapping_output_width},
              {"gan_loss", to_string(c.gan_loss)},
              {"attention_enabled", c.attention_enabled},
              {"cin_enabled", c.cin_enabled},
              {"cin_gamma_learnable", c.cin_gamma_learnable},
              {"cin_beta_learnable", c.cin_beta_learnable},
              {"init_std", c.init_std}};
}

inline void read_json(const Json& j, ModelConfig& c, const std::string& section = "model") {
  using detail::read_key;
  detail::reject_unknown_keys(
      j,
      {"image_size", "num_domains", "latent_dim", "base_channels", "num_res_blocks",
       "encoder_downsamples", "discriminator_layers", "discriminator_max_channels",
       "attention_blocks", "cin_sites_per_block", "mapping_hidden", "mapping_output_width",
       "gan_loss", "attention_enabled", "cin_enabled", "cin_gamma_learnable",
       "cin_beta_learnable", "init_std"},
      section);
  read_key(j, "image_size", c.image_size, section);
  read_key(j, "num_domains", c.num_domains, section);
  read_key(j, "latent_dim", c.latent_dim, section);
  read_key(j, "base_channels", c.base_channels, section);
  read_key(j, "num_res_blocks", c.num_res_blocks, section);
  read_key(j, "encoder_downsamples", c.encoder_downsamples, section);
  read_key(j, "discriminator_layers", c.discriminator_layers, section);
  read_key(j, "discriminator_max_channels", c.discriminator_max_channels, section);
  read_key(j, "attention_blocks", c.attention_blocks, section);
  read_key(j, "cin_sites_per_block", c.cin_sites_per_block, section);
  read_key(j, "mapping_hidden", c.mapping_hidden, section);
  read_key(j, "mapping_output_width", c.mapping_output_width, section);
  std::string gan = to_string(c.gan_loss);
  read_key(j, "gan_loss", gan, section);
  c.gan_loss = gan_loss_variant_from_string(gan);
  read_key(j, "attention_enabled", c.attention_enabled, section);
  read_key(j, "cin_enabled", c.cin_enabled, section);
  read_key(j, "cin_gamma_learnable", c.cin_gamma_learnable, section);
  read_key(j, "cin_beta_learnable", c.cin_beta_learnable, section);
  read_key(j, "init_std", c.init_std, section);
}

inline Json to_json(const LossWeights& w) {
  return Json{{"gan", w.gan}, {"fake", w.fake}, {"real", w.real}, {"latent", w.latent},
              {"reconstruction", w.reconstruction}};
}

inline void read_json(const Json& j, LossWeights& w, const std::string& section = "weights") {
  using detail::read_key;
  detail::reject_unknown_keys(j, {"gan", "fake", "real", "latent", "reconstruction"}, section);
  read_key(j, "gan", w.gan, section);
  read_key(j, "fake", w.fake, section);
  read_key(j, "real", w.real, section);
  read_key(j, "latent", w.latent, section);
  read_key(j, "reconstruction", w.reconstruction, section);
}

inline Json to_json(const DatasetSpec& s) {
  return Json{{"kind", to_string(s.kind)},
              {"domains", s.domains},
              {"image_size", s.image_size},
              {"samples_per_domain", s.samples_per_domain},
              {"test_per_domain", s.test_per_domain},
              {"seed", s.seed},
              {"root", s.root},
              {"crop_width", s.crop_width},
              {"crop_height", s.crop_height}};
}

inline void read_json(const Json& j, DatasetSpec& s, const std::string& section = "data") {
  using detail::read_key;
  detail::reject_unknown_keys(j,
                              {"kind", "domains", "image_size", "samples_per_domain",
                               "test_per_domain", "seed", "root", "crop_width", "crop_height"},
                              section);
  std::string kind = to_string(s.kind);
  read_key(j, "kind", kind, section);
  s.kind = dataset_kind_from_string(kind);
  read_key(j, "domains", s.domains, section);
  read_key(j, "image_size", s.image_size, section);
  read_key(j, "samples_per_domain", s.samples_per_domain, section);
  read_key(j, "test_per_domain", s.test_per_domain, section);
  read_key(j, "seed", s.seed, section);
  read_key(j, "root", s.root, section);
  read_key(j, "crop_width", s.crop_width, section);
  read_key(j, "crop_height", s.crop_height, section);
}

/// 64-bit FNV-1a of the compact JSON text, as 16 hex digits.
inline std::string fingerprint(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

}  // namespace sdit

#endif  // SDIT_SERIALIZATION_HPP
