#include "lirr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lirr/errors.hpp"
#include "lirr/keyvalue.hpp"

namespace lirr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'I', 'R', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError(path, 0, "truncated checkpoint");
  }
  return v;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string config_text(const ModelConfig& c) {
  KeyValueFile kv;
  kv.set("input_dim", std::to_string(c.input_dim));
  kv.set("encoder_hidden", join_sizes(c.encoder_hidden));
  kv.set("feature_dim", std::to_string(c.feature_dim));
  kv.set("head_hidden", std::to_string(c.head_hidden));
  kv.set("num_outputs", std::to_string(c.num_outputs));
  kv.set("activation", to_string(c.activation));
  kv.set("task_kind", to_string(c.task_kind));
  kv.set("cosine_head", c.cosine_head ? "true" : "false");
  kv.set("cosine_temperature", format_double(c.cosine_temperature));
  kv.set("seed", std::to_string(c.seed));
  return kv.to_string();
}

ModelConfig parse_config(const std::string& text, const std::string& path) {
  KeyValueFile kv = KeyValueFile::parse(text, path);
  ModelConfig c;
  c.input_dim = static_cast<std::size_t>(kv.get_int("input_dim", 2));
  c.encoder_hidden.clear();
  for (auto v : kv.get_int_list("encoder_hidden")) c.encoder_hidden.push_back(static_cast<std::size_t>(v));
  c.feature_dim = static_cast<std::size_t>(kv.get_int("feature_dim", 16));
  c.head_hidden = static_cast<std::size_t>(kv.get_int("head_hidden", 32));
  c.num_outputs = static_cast<std::size_t>(kv.get_int("num_outputs", 2));
  c.activation = parse_activation(kv.get_string("activation", "relu"));
  c.task_kind = parse_task_kind(kv.get_string("task_kind", "classification"));
  c.cosine_head = kv.get_bool("cosine_head", false);
  c.cosine_temperature = kv.get_double("cosine_temperature", 0.05);
  c.seed = std::stoull(kv.get_string("seed", "0"));
  return c;
}

}  // namespace

void save_checkpoint(const LirrModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = config_text(model.config);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  auto params = const_cast<LirrModel&>(model).parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(out, p.tensor->rows());
    put<std::uint64_t>(out, p.tensor->cols());
    out.write(reinterpret_cast<const char*>(p.tensor->data().data()),
              static_cast<std::streamsize>(p.tensor->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

LirrModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ParseError(path, 0, "not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto cfg_len = get<std::uint32_t>(in, path);
  std::string cfg(cfg_len, '\0');
  if (!in.read(cfg.data(), cfg_len)) throw ParseError(path, 0, "truncated checkpoint");
  LirrModel model = init_model(parse_config(cfg, path));

  auto params = model.parameters();
  const auto count = get<std::uint32_t>(in, path);
  if (count != params.size()) {
    throw ParseError(path, 0, "checkpoint holds " + std::to_string(count) +
                                  " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError(path, 0, "truncated checkpoint");
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (name != p.name || rows != p.tensor->rows() || cols != p.tensor->cols()) {
      throw ParseError(path, 0, "tensor '" + name + "' does not match expected '" + p.name +
                                    "' " + p.tensor->shape_str());
    }
    if (!in.read(reinterpret_cast<char*>(p.tensor->data().data()),
                 static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
      throw ParseError(path, 0, "truncated tensor data for " + name);
    }
  }
  return model;
}

}  // namespace lirr
