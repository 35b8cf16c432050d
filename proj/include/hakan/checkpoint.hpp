#pragma once

#include <string>

#include "hakan/config.hpp"
#include "hakan/model.hpp"

namespace hakan {

// Binary checkpoint: model configuration plus every parameter tensor, stored
// as little-endian float64. Reloading reproduces forecasts bit for bit.
struct Checkpoint {
  HaKanModel model;
  KeyValues metadata;  // model.* keys and any extra run keys
};

void save_checkpoint(const std::string& path, const HaKanModel& model, const KeyValues& extra = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hakan
