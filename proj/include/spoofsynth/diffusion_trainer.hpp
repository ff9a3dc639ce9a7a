#pragma once

#include "spoofsynth/denoiser.hpp"
#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/style_encoder.hpp"

#include <torch/torch.h>

#include <functional>
#include <vector>

namespace spoofsynth {

/// Aligned live/spoof training pairs plus the pool guides are drawn from.
struct PairedData {
  torch::Tensor live;               // (N, 3, H, W) in [-1, 1]
  torch::Tensor spoof;              // (N, 3, H, W), same identity and domain as live
  std::vector<int64_t> style;       // spoof style of each pair
  torch::Tensor guides;             // (M, 3, H, W) spoof images
  std::vector<int64_t> guide_style; // style of each guide
};

struct DiffusionTrainOptions {
  int64_t steps = 2000;
  int64_t batch_size = 16;
  double learning_rate = 5e-4;
  double p_uncond = 0.1;
  /// Exponential moving average of the weights copied into the network at the
  /// end; 0 disables it.
  double ema_decay = 0.995;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  std::function<void(int64_t, double)> on_log;
  int64_t log_every = 50;
};

void validate(const DiffusionTrainOptions& options);

/// Epsilon-prediction training with per-sample condition dropout. A fresh
/// guide of the pair's style is drawn for every sample at every step.
/// Returns the per-step loss curve.
std::vector<double> train_denoiser(DenoiserNet& net, const StyleEncoder& encoder, const PairedData& data,
                                   const NoiseSchedule& schedule, const DiffusionTrainOptions& options);

}  // namespace spoofsynth
