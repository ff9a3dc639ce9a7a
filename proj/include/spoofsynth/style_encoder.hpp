#pragma once

#include "spoofsynth/noise_predictor.hpp"

#include <torch/torch.h>

#include <functional>
#include <vector>

namespace spoofsynth {

struct StyleEncoderConfig {
  int64_t image_size = 64;
  int64_t num_styles = 3;
  int64_t stem_channels = 16;
  /// One residual stage per entry, each halving the resolution (1/2, 1/4, 1/8).
  std::vector<int64_t> stage_channels{32, 64, 64};
  /// Stage resolutions exported as the condition stack, strictly decreasing.
  std::vector<int64_t> condition_resolutions{32, 16};
  int64_t groups = 8;

  int64_t stage_resolution(std::size_t stage) const { return image_size >> (stage + 1); }
  /// Channel width of each exported condition map.
  std::vector<int64_t> condition_channels() const;
};

void validate(const StyleEncoderConfig& config);

/// Residual convolutional classifier over spoofing styles.
class StyleEncoderNetImpl : public torch::nn::Module {
 public:
  explicit StyleEncoderNetImpl(StyleEncoderConfig config);

  /// Outputs of every stage, highest resolution first.
  std::vector<torch::Tensor> stages(const torch::Tensor& x);
  torch::Tensor logits_from_stages(const std::vector<torch::Tensor>& stage_outputs);
  torch::Tensor forward(const torch::Tensor& x) { return logits_from_stages(stages(x)); }

  const StyleEncoderConfig& config() const { return config_; }

 private:
  StyleEncoderConfig config_;
  torch::nn::Conv2d stem{nullptr};
  torch::nn::GroupNorm stem_norm{nullptr};
  std::vector<torch::nn::Sequential> stage_main_;
  std::vector<torch::nn::Conv2d> stage_skip_;
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(StyleEncoderNet);

/// Frozen style encoder: parameters never receive gradients after
/// construction, so it can be shared read-only across threads.
class StyleEncoder {
 public:
  explicit StyleEncoder(StyleEncoderNet net);

  /// guide is (3, H, W) or (B, 3, H, W) in [-1, 1]; returns (B, ...) maps.
  ConditionStack encode_style(const torch::Tensor& guide) const;
  torch::Tensor classify(const torch::Tensor& images) const;

  const StyleEncoderConfig& config() const { return net_->config(); }
  StyleEncoderNet net() const { return net_; }

 private:
  mutable StyleEncoderNet net_;
};

struct StyleTrainOptions {
  int64_t steps = 300;
  int64_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Invoked every `log_every` steps with (step, batch loss).
  std::function<void(int64_t, double)> on_log;
  int64_t log_every = 50;
};

struct StyleTrainResult {
  StyleEncoder encoder;
  std::vector<double> loss_curve;  // one entry per step
  double train_accuracy = 0.0;
};

/// Cross-entropy training on (N, 3, H, W) images in [-1, 1] with style ids in
/// [0, num_styles). Needs at least two distinct styles.
StyleTrainResult train_style_encoder(const torch::Tensor& images, const std::vector<int64_t>& styles,
                                     StyleEncoderConfig config, const StyleTrainOptions& options);

}  // namespace spoofsynth
