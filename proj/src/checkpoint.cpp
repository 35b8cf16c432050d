#include "hakan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace hakan {

namespace {

constexpr char kMagic[8] = {'H', 'A', 'K', 'A', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  return v;
}

std::string get_string(std::istream& in, const std::string& path, std::uint64_t max_len = 1u << 24) {
  const auto len = get<std::uint64_t>(in, path);
  if (len > max_len) throw DataError("checkpoint '" + path + "' has an implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  return s;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const HaKanModel& model, const KeyValues& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  KeyValues meta = extra;
  for (const auto& [k, v] : model_key_values(model.config())) meta[k] = v;

  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put_string(out, serialize_key_values(meta));
  const auto params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put_string(out, p.name);
    const auto& shape = p.tensor.shape();
    put<std::uint64_t>(out, shape.size());
    for (auto d : shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.tensor.data().data()),
              static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path + "' is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw DataError("checkpoint '" + path + "' has unsupported version " + std::to_string(version));
  }
  KeyValues meta = parse_key_values(get_string(in, path));
  ModelConfig config = model_config_from(meta);
  config.validate();

  Checkpoint ckpt{HaKanModel::zeros(config), meta};
  std::map<std::string, Tensor> by_name;
  for (const auto& p : ckpt.model.parameters()) by_name.emplace(p.name, p.tensor);

  const auto count = get<std::uint64_t>(in, path);
  if (count != by_name.size()) {
    throw DataError("checkpoint '" + path + "' holds " + std::to_string(count) + " tensors, model expects " +
                    std::to_string(by_name.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, path, 4096);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint '" + path + "': unexpected tensor '" + name + "'");
    const auto rank = get<std::uint64_t>(in, path);
    if (rank > 8) throw DataError("checkpoint '" + path + "': implausible rank for '" + name + "'");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in, path));
    Tensor& t = it->second;
    if (shape != t.shape()) {
      throw DataError("checkpoint '" + path + "': tensor '" + name + "' has shape " + to_string(shape) +
                      ", expected " + to_string(t.shape()));
    }
    in.read(reinterpret_cast<char*>(t.mutable_data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  }
  return ckpt;
}

}  // namespace hakan
