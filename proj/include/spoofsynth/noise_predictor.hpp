#pragma once

#include <torch/torch.h>

#include <vector>

namespace spoofsynth {

/// Multi-scale spoofing-style feature maps taken from the style encoder.
///
/// `maps[i]` has shape (B, C_i, R_i, R_i) with R_i strictly decreasing. `keep`
/// is an optional (B,) float mask: samples with keep == 0 are treated as
/// unconditional, which lets one batch mix conditional and dropped samples.
struct ConditionStack {
  std::vector<torch::Tensor> maps;
  torch::Tensor keep;

  std::vector<int64_t> resolutions() const;
  /// Map whose spatial side equals `resolution`, or nullptr.
  const torch::Tensor* find(int64_t resolution) const;
};

/// Validates ordering and batch consistency; throws std::invalid_argument.
void validate(const ConditionStack& cond);

/// The denoising network eps_theta seen from the diffusion and sampling code.
///
/// x_t and live are (B, 3, H, W); t is a (B,) int64 tensor of timesteps in
/// [1, T]. `cond == nullptr` selects the unconditional path.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual torch::Tensor predict_noise(const torch::Tensor& x_t, const torch::Tensor& live,
                                      const torch::Tensor& t, const ConditionStack* cond) = 0;
};

/// (B,) int64 tensor filled with `t`.
torch::Tensor timestep_tensor(int64_t t, int64_t batch);

}  // namespace spoofsynth
