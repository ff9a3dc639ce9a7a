#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spoofsynth {

/// Malformed or inconsistent input data (manifests, caches, checkpoints, images).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

/// splitmix64 mixing of (seed, index); used to give every sample its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

torch::Generator make_generator(std::uint64_t seed);

/// 64-bit FNV-1a. Stable across platforms, used for config hashes.
std::uint64_t fnv1a64(std::string_view text);

std::string hex64(std::uint64_t value);

}  // namespace spoofsynth
