#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "sdit/training.hpp"

namespace sdit {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'I', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(const std::string& buf, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > buf.size()) throw IntegrityError(std::string("checkpoint truncated reading ") + what);
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

Json shape_json(const Shape& s) { return Json::array({s.n, s.h, s.w, s.c}); }

Shape shape_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw IntegrityError("checkpoint tensor shape malformed");
  return Shape{j[0].get<Index>(), j[1].get<Index>(), j[2].get<Index>(), j[3].get<Index>()};
}

void put_tensor(std::string& buf, const Tensor<float>& t) {
  buf.append(reinterpret_cast<const char*>(t.ptr()), sizeof(float) * static_cast<std::size_t>(t.size()));
}

Tensor<float> get_tensor(const std::string& buf, std::size_t& pos, const Shape& s) {
  Tensor<float> t(s);
  const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(s.size());
  if (pos + bytes > buf.size()) throw IntegrityError("checkpoint truncated inside tensor data");
  std::memcpy(t.ptr(), buf.data() + pos, bytes);
  pos += bytes;
  return t;
}

std::uint32_t crc(const std::string& payload) {
  uLong c = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(payload.data());
  std::size_t left = payload.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Json header{{"model", to_json(ckpt.model_config)},
              {"train", to_json(ckpt.train_config)},
              {"domains", ckpt.domains},
              {"iteration", ckpt.iteration},
              {"rng_state", ckpt.rng_state},
              {"iterator", {{"epoch", ckpt.iterator.epoch}, {"cursor", ckpt.iterator.cursor}}},
              {"generator_optimizer_steps", ckpt.generator_optimizer.steps},
              {"discriminator_optimizer_steps", ckpt.discriminator_optimizer.steps}};
  Json params = Json::array();
  for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
    params.push_back({{"name", ckpt.parameter_names.at(i)}, {"shape", shape_json(ckpt.parameters[i].shape)}});
  }
  header["parameters"] = params;
  auto moment_shapes = [](const OptimizerState& s) {
    Json a = Json::array();
    for (const auto& t : s.first) a.push_back(shape_json(t.shape));
    return a;
  };
  header["generator_moment_shapes"] = moment_shapes(ckpt.generator_optimizer);
  header["discriminator_moment_shapes"] = moment_shapes(ckpt.discriminator_optimizer);

  const std::string header_text = header.dump();
  std::string payload;
  put<std::uint64_t>(payload, header_text.size());
  payload += header_text;
  for (const auto& t : ckpt.parameters) put_tensor(payload, t);
  for (const OptimizerState* s : {&ckpt.generator_optimizer, &ckpt.discriminator_optimizer}) {
    for (const auto& t : s->first) put_tensor(payload, t);
    for (const auto& t : s->second) put_tensor(payload, t);
  }

  std::string file(kMagic, sizeof kMagic);
  put<std::uint32_t>(file, ckpt.format_version);
  put<std::uint64_t>(file, payload.size());
  file += payload;
  put<std::uint32_t>(file, crc(payload));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw DataError("short write to checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (file.size() < sizeof kMagic || std::memcmp(file.data(), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError(path.string() + " is not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(file, pos, "version");
  if (version != Checkpoint::kFormatVersion) {
    throw IntegrityError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const auto length = get<std::uint64_t>(file, pos, "payload length");
  if (pos + length + sizeof(std::uint32_t) != file.size()) {
    throw IntegrityError("checkpoint " + path.string() + " is truncated or has trailing data");
  }
  const std::string payload = file.substr(pos, length);
  pos += length;
  const auto stored_crc = get<std::uint32_t>(file, pos, "checksum");
  if (stored_crc != crc(payload)) throw IntegrityError("checkpoint " + path.string() + " failed its checksum");

  std::size_t p = 0;
  const auto header_len = get<std::uint64_t>(payload, p, "header length");
  if (p + header_len > payload.size()) throw IntegrityError("checkpoint header truncated");
  Json header;
  try {
    header = Json::parse(payload.substr(p, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header unreadable: ") + e.what());
  }
  p += header_len;

  Checkpoint c;
  c.format_version = version;
  try {
    read_json(header.at("model"), c.model_config, "checkpoint.model");
    read_json(header.at("train"), c.train_config, "checkpoint.train");
    c.domains = header.at("domains").get<std::vector<std::string>>();
    c.iteration = header.at("iteration").get<std::int64_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
    c.iterator.epoch = header.at("iterator").at("epoch").get<std::int64_t>();
    c.iterator.cursor = header.at("iterator").at("cursor").get<std::int64_t>();
    c.generator_optimizer.steps = header.at("generator_optimizer_steps").get<std::int64_t>();
    c.discriminator_optimizer.steps = header.at("discriminator_optimizer_steps").get<std::int64_t>();
    for (const auto& e : header.at("parameters")) {
      c.parameter_names.push_back(e.at("name").get<std::string>());
      c.parameters.push_back(get_tensor(payload, p, shape_from(e.at("shape"))));
    }
    for (auto [state, key] : {std::pair{&c.generator_optimizer, "generator_moment_shapes"},
                              std::pair{&c.discriminator_optimizer, "discriminator_moment_shapes"}}) {
      std::vector<Shape> shapes;
      for (const auto& s : header.at(key)) shapes.push_back(shape_from(s));
      for (const auto& s : shapes) state->first.push_back(get_tensor(payload, p, s));
      for (const auto& s : shapes) state->second.push_back(get_tensor(payload, p, s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header incomplete: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint configuration invalid: ") + e.what());
  }
  if (p != payload.size()) throw IntegrityError("checkpoint payload has unexpected trailing bytes");
  return c;
}

}  // namespace sdit
