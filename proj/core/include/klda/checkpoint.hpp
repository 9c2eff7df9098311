#pragma once

#include <cstdint>
#include <string>

#include "klda/model.hpp"

namespace klda {

struct Checkpoint {
  ModelParams model;
  std::uint64_t config_hash = 0;
};

// Versioned little-endian binary container: architecture, named tensors as
// raw 64-bit values, and the configuration hash of the run that wrote it.
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& model,
                     std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace klda
