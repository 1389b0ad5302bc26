#pragma once

#include <string>

#include "lgts/model.hpp"

namespace lgts {

inline constexpr int kCheckpointVersion = 1;

// Self-describing JSON checkpoint: version, config (including the kernel
// assignment) and every parameter array with its shape.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params);

struct Checkpoint {
  int version = 0;
  ModelConfig config;
  ModelParams params;
};

Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the file bytes, for reproducibility checks.
std::string file_digest(const std::string& path);

}  // namespace lgts
