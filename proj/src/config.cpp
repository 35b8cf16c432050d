#include "hakan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hakan {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a real number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string from_int(T v) {
  return std::to_string(v);
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define HAKAN_SIZE_FIELD(NAME, MEMBER)                                                                    \
  {                                                                                                       \
    NAME, Field {                                                                                         \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_size(k, v); },         \
          [](const RunConfig& c) { return from_int(c.MEMBER); }                                           \
    }                                                                                                     \
  }
#define HAKAN_DOUBLE_FIELD(NAME, MEMBER)                                                                  \
  {                                                                                                       \
    NAME, Field {                                                                                         \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); },       \
          [](const RunConfig& c) { return format_double(c.MEMBER); }                                      \
    }                                                                                                     \
  }
#define HAKAN_BOOL_FIELD(NAME, MEMBER)                                                                    \
  {                                                                                                       \
    NAME, Field {                                                                                         \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_bool(k, v); },         \
          [](const RunConfig& c) { return from_bool(c.MEMBER); }                                          \
    }                                                                                                     \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"dataset.name", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.dataset_name = v; },
                             [](const RunConfig& c) { return c.dataset_name; }}},
      {"dataset.path", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.dataset_path = v; },
                             [](const RunConfig& c) { return c.dataset_path; }}},
      HAKAN_BOOL_FIELD("dataset.standardize", standardize),
      {"split.kind", Field{[](RunConfig& c, const std::string&, const std::string& v) {
                             c.split.kind = parse_split_kind(v);
                           },
                           [](const RunConfig& c) { return to_string(c.split.kind); }}},
      HAKAN_SIZE_FIELD("split.train_months", split.train_months),
      HAKAN_SIZE_FIELD("split.val_months", split.val_months),
      HAKAN_SIZE_FIELD("split.test_months", split.test_months),
      HAKAN_DOUBLE_FIELD("split.train_ratio", split.train_ratio),
      HAKAN_DOUBLE_FIELD("split.val_ratio", split.val_ratio),
      HAKAN_DOUBLE_FIELD("split.test_ratio", split.test_ratio),
      HAKAN_BOOL_FIELD("split.prepend_context", split.prepend_context),
      HAKAN_SIZE_FIELD("split.rows_per_month", split.rows_per_month),
      HAKAN_SIZE_FIELD("model.lookback", model.lookback),
      HAKAN_SIZE_FIELD("model.horizon", model.horizon),
      HAKAN_SIZE_FIELD("model.channels", model.channels),
      HAKAN_SIZE_FIELD("model.patch_len", model.patch_len),
      HAKAN_SIZE_FIELD("model.stride", model.stride),
      HAKAN_SIZE_FIELD("model.d_model", model.d_model),
      HAKAN_SIZE_FIELD("model.blocks", model.blocks),
      HAKAN_SIZE_FIELD("model.bottleneck", model.bottleneck),
      {"model.basis", Field{[](RunConfig& c, const std::string&, const std::string& v) {
                              c.model.basis.kind = parse_basis_kind(v);
                            },
                            [](const RunConfig& c) { return to_string(c.model.basis.kind); }}},
      HAKAN_DOUBLE_FIELD("model.hahn_a", model.basis.a),
      HAKAN_DOUBLE_FIELD("model.hahn_b", model.basis.b),
      {"model.hahn_n", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                               c.model.basis.n = to_int(k, v);
                             },
                             [](const RunConfig& c) { return from_int(c.model.basis.n); }}},
      {"model.degree", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                               c.model.basis.degree = to_int(k, v);
                             },
                             [](const RunConfig& c) { return from_int(c.model.basis.degree); }}},
      {"model.mode", Field{[](RunConfig& c, const std::string&, const std::string& v) {
                             c.model.mode = parse_layer_mode(v);
                           },
                           [](const RunConfig& c) { return to_string(c.model.mode); }}},
      HAKAN_BOOL_FIELD("model.intra", model.intra_enabled),
      HAKAN_BOOL_FIELD("model.inter", model.inter_enabled),
      {"model.seed", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                             c.model.seed = to_u64(k, v);
                           },
                           [](const RunConfig& c) { return from_int(c.model.seed); }}},
      HAKAN_DOUBLE_FIELD("model.revin_eps", model.revin_eps),
      HAKAN_DOUBLE_FIELD("model.init_scale", model.init_scale),
      HAKAN_SIZE_FIELD("train.max_epochs", train.max_epochs),
      HAKAN_SIZE_FIELD("train.patience", train.patience),
      HAKAN_DOUBLE_FIELD("train.lr", train.lr),
      HAKAN_SIZE_FIELD("train.batch_size", train.batch_size),
      HAKAN_DOUBLE_FIELD("train.clip_norm", train.clip_norm),
      HAKAN_SIZE_FIELD("train.eval_batch_size", train.eval_batch_size),
      HAKAN_SIZE_FIELD("train.micro_batch", train.micro_batch),
      HAKAN_SIZE_FIELD("train.max_batches_per_epoch", train.max_batches_per_epoch),
      {"run.seeds", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.seeds = parse_seed_list(v); },
                          [](const RunConfig& c) {
                            std::string s;
                            for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                              if (i) s += ',';
                              s += std::to_string(c.seeds[i]);
                            }
                            return s;
                          }}},
      HAKAN_BOOL_FIELD("run.deterministic", deterministic),
      {"run.output_dir", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
                               [](const RunConfig& c) { return c.output_dir; }}},
  };
  return table;
}

#undef HAKAN_SIZE_FIELD
#undef HAKAN_DOUBLE_FIELD
#undef HAKAN_BOOL_FIELD

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues parse_key_values(const std::string& text) {
  std::istringstream is(text);
  return parse_key_values(is);
}

std::string serialize_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return dataset_name == o.dataset_name && dataset_path == o.dataset_path && standardize == o.standardize &&
         split == o.split && model == o.model && train.max_epochs == o.train.max_epochs &&
         train.patience == o.train.patience && train.lr == o.train.lr && train.batch_size == o.train.batch_size &&
         train.clip_norm == o.train.clip_norm && train.eval_batch_size == o.train.eval_batch_size &&
         train.micro_batch == o.train.micro_batch &&
         train.max_batches_per_epoch == o.train.max_batches_per_epoch && seeds == o.seeds &&
         deterministic == o.deterministic && output_dir == o.output_dir;
}

void apply_key_values(RunConfig& config, const KeyValues& kv) {
  const auto& table = fields();
  for (const auto& [key, value] : kv) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second.set(config, key, value);
  }
  if (!config.seeds.empty()) {
    config.train.seed = config.seeds.front();
    config.model.seed = kv.count("model.seed") ? config.model.seed : config.seeds.front();
  }
  config.train.deterministic = config.deterministic;
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
  KeyValues kv;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not of the form key=value");
    kv[trim(a.substr(0, eq))] = trim(a.substr(eq + 1));
  }
  apply_key_values(config, kv);
}

KeyValues to_key_values(const RunConfig& config) {
  KeyValues kv;
  for (const auto& [key, field] : fields()) kv[key] = field.get(config);
  return kv;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig config;
  apply_key_values(config, parse_key_values(in, path));
  return config;
}

void save_run_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << serialize_key_values(to_key_values(config));
}

KeyValues model_key_values(const ModelConfig& model) {
  RunConfig rc;
  rc.model = model;
  KeyValues all = to_key_values(rc);
  KeyValues out;
  for (const auto& [k, v] : all) {
    if (k.rfind("model.", 0) == 0) out[k] = v;
  }
  return out;
}

ModelConfig model_config_from(const KeyValues& kv) {
  RunConfig rc;
  const auto& table = fields();
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) != 0) continue;
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second.set(rc, key, value);
  }
  return rc.model;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    seeds.push_back(to_u64("run.seeds", item));
  }
  if (seeds.empty()) throw ConfigError("key 'run.seeds': empty seed list");
  return seeds;
}

}  // namespace hakan
