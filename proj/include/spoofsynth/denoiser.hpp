#pragma once

#include "spoofsynth/noise_predictor.hpp"
#include "spoofsynth/stfm.hpp"

#include <torch/torch.h>

#include <map>
#include <vector>

namespace spoofsynth {

struct DenoiserConfig {
  int64_t image_size = 64;
  int64_t base_channels = 32;
  std::vector<int64_t> channel_multipliers{1, 2, 2};
  int64_t res_blocks = 2;
  int64_t time_embed_dim = 128;
  int64_t groups = 8;
  /// STFM is attached to every block whose spatial side is <= this value.
  int64_t stfm_max_resolution = 32;
  int64_t stfm_heads = 1;
  bool stfm_zero_init = true;
  /// Patch sizes per resolution; resolutions not listed use default_stfm_config.
  std::map<int64_t, StfmConfig> stfm_overrides;
  /// Channel width of each condition map, ordered like stfm_resolutions().
  /// Empty means the condition maps match the backbone width.
  std::vector<int64_t> condition_channels;
  int64_t input_channels = 6;
  int64_t output_channels = 3;

  int64_t levels() const { return static_cast<int64_t>(channel_multipliers.size()); }
  int64_t level_resolution(int64_t level) const { return image_size >> level; }
  int64_t level_channels(int64_t level) const {
    return base_channels * channel_multipliers.at(static_cast<std::size_t>(level));
  }
  /// Resolutions that carry STFM blocks, strictly decreasing.
  std::vector<int64_t> stfm_resolutions() const;
  StfmConfig stfm_config(int64_t resolution) const;
};

void validate(const DenoiserConfig& config);

/// Sinusoidal embedding of integer timesteps, (B,) -> (B, dim).
torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim);

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t in_channels, int64_t out_channels, int64_t time_embed_dim, int64_t groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emb);

 private:
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::Linear time_proj{nullptr};
};
TORCH_MODULE(ResBlock);

/// Encoder-decoder denoiser with skip connections. Input is the noisy spoof
/// concatenated with the clean live image (6 channels); output is the
/// 3-channel noise estimate. STFM blocks follow every residual block at
/// resolutions <= stfm_max_resolution.
class DenoiserNetImpl : public torch::nn::Module, public NoisePredictor {
 public:
  explicit DenoiserNetImpl(DenoiserConfig config);

  torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& live, const torch::Tensor& t,
                        const ConditionStack* cond);

  torch::Tensor predict_noise(const torch::Tensor& x_t, const torch::Tensor& live, const torch::Tensor& t,
                              const ConditionStack* cond) override {
    return forward(x_t, live, t, cond);
  }

  const DenoiserConfig& config() const { return config_; }
  std::vector<StfmBlock> stfm_blocks() const;

 private:
  struct Stage {
    std::vector<ResBlock> blocks;
    std::vector<StfmBlock> stfm;  // null entries where no STFM applies
    int64_t resolution = 0;
  };

  torch::Tensor apply_stage(Stage& stage, torch::Tensor h, const torch::Tensor& emb,
                            const ConditionStack* cond, const torch::Tensor* skip);
  StfmBlock make_stfm(const std::string& name, int64_t channels, int64_t resolution);

  DenoiserConfig config_;
  torch::nn::Linear time_fc1{nullptr}, time_fc2{nullptr};
  torch::nn::Conv2d in_conv{nullptr}, out_conv{nullptr};
  torch::nn::GroupNorm out_norm{nullptr};
  std::vector<Stage> down_;
  std::vector<torch::nn::Conv2d> downsample_;
  Stage mid_;
  std::vector<Stage> up_;
  std::vector<torch::nn::Conv2d> upsample_;
};
TORCH_MODULE(DenoiserNet);

}  // namespace spoofsynth
