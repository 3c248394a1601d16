#include "sdit/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace sdit {

namespace {

const std::vector<VariantSpec>& variant_table() {
  static const std::vector<VariantSpec> table{
      {"no-cin", true, false, true, true, false},
      {"no-atten-no-lat", false, true, true, true, false},
      {"no-atten", false, true, true, true, true},
      {"no-lat", true, true, true, true, false},
      {"full", true, true, true, true, true},
      {"gamma-only", true, true, true, false, true},
      {"beta-only", true, true, false, true, true},
      {"both", true, true, true, true, true},
  };
  return table;
}

Json scalar_to_json(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  std::int64_t i = 0;
  if (auto r = std::from_chars(first, last, i); r.ec == std::errc() && r.ptr == last) return i;
  std::uint64_t u = 0;
  if (auto r = std::from_chars(first, last, u); r.ec == std::errc() && r.ptr == last) return u;
  double d = 0;
  if (auto r = std::from_chars(first, last, d); r.ec == std::errc() && r.ptr == last) return d;
  return s;
}

Json node_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(n);
    case YAML::NodeType::Sequence: {
      Json a = Json::array();
      for (const auto& item : n) a.push_back(node_to_json(item));
      return a;
    }
    case YAML::NodeType::Map: {
      Json o = Json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = node_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

void emit(YAML::Emitter& out, const Json& j) {
  if (j.is_object()) {
    out << YAML::BeginMap;
    for (const auto& item : j.items()) {
      out << YAML::Key << item.key() << YAML::Value;
      emit(out, item.value());
    }
    out << YAML::EndMap;
  } else if (j.is_array()) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : j) emit(out, v);
    out << YAML::EndSeq;
  } else if (j.is_string()) {
    out << YAML::DoubleQuoted << j.get<std::string>();
  } else if (j.is_boolean()) {
    out << YAML::TrueFalseBool << j.get<bool>();
  } else if (j.is_number_float()) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, j.get<double>());
    std::string text(buf, r.ptr);
    if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
    out << text;
  } else if (j.is_number_unsigned()) {
    out << j.get<std::uint64_t>();
  } else if (j.is_number_integer()) {
    out << j.get<std::int64_t>();
  } else {
    out << YAML::Null;
  }
}

}  // namespace

void VariantSpec::apply(ModelConfig& model, TrainConfig& train) const {
  model.attention_enabled = attention;
  model.cin_enabled = cin;
  model.cin_gamma_learnable = gamma_learnable;
  model.cin_beta_learnable = beta_learnable;
  if (!latent_loss) train.weights.latent = 0;
}

VariantSpec variant_by_name(const std::string& name) {
  for (const auto& v : variant_table()) {
    if (v.name == name) return v;
  }
  std::string msg = "unknown ablation variant '" + name + "'; known:";
  for (const auto& n : known_variants()) msg += " " + n;
  throw ConfigError(msg);
}

std::vector<std::string> known_variants() {
  std::vector<std::string> out;
  for (const auto& v : variant_table()) out.push_back(v.name);
  return out;
}

std::vector<std::string> default_variant_matrix() {
  return {"no-cin", "no-atten-no-lat", "no-atten", "no-lat", "full", "gamma-only", "beta-only"};
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  train.validate();
  eval.validate();
  if (model.num_domains != data.num_domains()) {
    throw ConfigError("model.num_domains = " + std::to_string(model.num_domains) + " but data lists " +
                      std::to_string(data.num_domains()) + " domains");
  }
  if (model.image_size != data.image_size) {
    throw ConfigError("model.image_size = " + std::to_string(model.image_size) +
                      " differs from data.image_size = " + std::to_string(data.image_size));
  }
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
  if (output.sample_every < 0) throw ConfigError("output.sample_every must be >= 0");
  for (const auto& v : ablation.variants) variant_by_name(v);
}

RunConfig::RunConfig() {
  model.num_domains = data.num_domains();
  model.image_size = data.image_size;
}

Json to_json(const RunConfig& c) {
  return Json{{"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"data", to_json(c.data)},
              {"eval", to_json(c.eval)},
              {"ablation", {{"variants", c.ablation.variants}}},
              {"output", {{"dir", c.output.dir}, {"sample_every", c.output.sample_every}}}};
}

void read_json(const Json& j, RunConfig& c) {
  if (j.is_null()) return;
  detail::reject_unknown_keys(j, {"model", "train", "data", "eval", "ablation", "output"}, "config");
  if (j.contains("data")) read_json(j.at("data"), c.data, "data");
  const bool model_domains = j.contains("model") && j.at("model").contains("num_domains");
  const bool model_size = j.contains("model") && j.at("model").contains("image_size");
  if (!model_domains) c.model.num_domains = c.data.num_domains();
  if (!model_size) c.model.image_size = c.data.image_size;
  if (j.contains("model")) read_json(j.at("model"), c.model, "model");
  if (j.contains("train")) read_json(j.at("train"), c.train, "train");
  if (j.contains("eval")) read_json(j.at("eval"), c.eval, "eval");
  if (j.contains("ablation")) {
    detail::reject_unknown_keys(j.at("ablation"), {"variants"}, "ablation");
    detail::read_key(j.at("ablation"), "variants", c.ablation.variants, "ablation");
  }
  if (j.contains("output")) {
    detail::reject_unknown_keys(j.at("output"), {"dir", "sample_every"}, "output");
    detail::read_key(j.at("output"), "dir", c.output.dir, "output");
    detail::read_key(j.at("output"), "sample_every", c.output.sample_every, "output");
  }
}

Json yaml_to_json(const std::string& text) {
  try {
    return node_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
}

std::string to_yaml(const RunConfig& c) {
  YAML::Emitter out;
  emit(out, to_json(c));
  return std::string(out.c_str()) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    read_json(yaml_to_json(ss.str()), base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return base;
}

}  // namespace sdit
