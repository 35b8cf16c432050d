#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "hakan/data.hpp"
#include "hakan/model.hpp"
#include "hakan/training.hpp"

namespace hakan {

// Flat `key = value` text: one entry per line, `#` starts a comment, dotted
// keys group related settings (model.blocks, train.lr, ...).
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in, const std::string& source = "<input>");
KeyValues parse_key_values(const std::string& text);
std::string serialize_key_values(const KeyValues& kv);

// Everything one training run needs.
struct RunConfig {
  std::string dataset_name;
  std::string dataset_path;
  bool standardize = true;
  SplitSpec split;
  ModelConfig model;
  TrainSpec train;
  std::vector<std::uint64_t> seeds{2021};
  bool deterministic = true;
  std::string output_dir = "runs";

  bool operator==(const RunConfig& other) const;
};

// Unknown keys and malformed values throw ConfigError naming the key.
void apply_key_values(RunConfig& config, const KeyValues& kv);
// Applies "key=value" overrides from the command line.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);
KeyValues to_key_values(const RunConfig& config);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

KeyValues model_key_values(const ModelConfig& model);
ModelConfig model_config_from(const KeyValues& kv);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::string format_double(double v);

}  // namespace hakan
