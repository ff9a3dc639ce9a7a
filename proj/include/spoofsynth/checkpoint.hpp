#pragma once

#include "json.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace spoofsynth {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// File layout: a magic line, one JSON header line, then the raw float32
/// little-endian tensor payloads in header order.
struct Checkpoint {
  std::string kind;
  nlohmann::json meta;  // config, seed, config_hash and anything else the writer records
  NamedTensors tensors;

  const torch::Tensor& tensor(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws DataError on missing files, bad magic, or truncated payloads.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers of a module, prefixed.
NamedTensors module_state(const torch::nn::Module& module, const std::string& prefix = "");

/// Copies tensors named prefix + parameter name into the module. Every
/// parameter and buffer must be present with a matching shape.
void load_module_state(torch::nn::Module& module, const Checkpoint& checkpoint, const std::string& prefix = "");

}  // namespace spoofsynth
