#pragma once

// Checkpoint layout: the line "HSAL-CHECKPOINT 1", one line of JSON with
// the model config, seed and every tensor's name and shape, then all tensor
// values in registration order as little-endian float64.

#include <cstdint>
#include <filesystem>

#include "hsal/model.hpp"

namespace hsal {

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

/// Writes to a temporary file first, so an existing checkpoint survives a
/// failed write.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hsal
