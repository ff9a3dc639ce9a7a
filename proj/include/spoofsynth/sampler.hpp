#pragma once

#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/noise_predictor.hpp"
#include "spoofsynth/style_encoder.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <optional>

namespace spoofsynth {

struct SamplerConfig {
  double gamma = 2.0;        // guidance strength
  int64_t t_start = 100;     // forward-noising depth of the edit
  double p_uncond = 0.1;     // training-time condition dropout
  std::uint64_t seed = 0;
};

void validate(const SamplerConfig& config, const NoiseSchedule& schedule);

/// Whole-stack dropout: std::nullopt with probability p_uncond.
std::optional<ConditionStack> condition_dropout(const ConditionStack& cond, double p_uncond,
                                                torch::Generator& rng);

/// Per-sample keep mask (1 = keep condition) for batched training.
torch::Tensor condition_keep_mask(int64_t batch, double p_uncond, torch::Generator& rng);

/// gamma * c + (1 - gamma) * u, i.e. u + gamma (c - u); exact at gamma 0 and 1.
torch::Tensor guided_combination(const torch::Tensor& conditional, const torch::Tensor& unconditional,
                                 double gamma);

/// Classifier-free guided noise estimate.
torch::Tensor cfg_predict(NoisePredictor& denoiser, const torch::Tensor& x_t, const torch::Tensor& live,
                          const torch::Tensor& t, const ConditionStack& cond, double gamma);

/// Edit-based conditional sampling from a noised live image.
///
/// live is (B, 3, H, W) in [-1, 1]; sample i draws all of its noise from a
/// generator seeded with derive_seed(config.seed, first_sample_index + i), so
/// results do not depend on how samples are batched. Returns values in [-1, 1].
torch::Tensor edit_sample(const torch::Tensor& live, const ConditionStack& cond, const SamplerConfig& config,
                          const NoiseSchedule& schedule, NoisePredictor& denoiser,
                          std::uint64_t first_sample_index = 0);

/// Same, encoding `guide` with the style encoder first.
torch::Tensor edit_sample(const torch::Tensor& live, const torch::Tensor& guide, const SamplerConfig& config,
                          const NoiseSchedule& schedule, NoisePredictor& denoiser, const StyleEncoder& encoder,
                          std::uint64_t first_sample_index = 0);

}  // namespace spoofsynth
