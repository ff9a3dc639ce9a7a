#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace spoofsynth {

enum class StatKind { mean, variance };

/// Patch-wise channel statistics of a feature map, flattened row-major over the
/// patch grid with the whole-map statistic appended as the last token.
///
/// `tokens` is (rows*cols + 1, C) for a single map or (B, rows*cols + 1, C)
/// for a batch.
struct PatchStatsSequence {
  torch::Tensor tokens;
  int64_t rows = 0;
  int64_t cols = 0;
  StatKind kind = StatKind::mean;

  int64_t num_patches() const { return rows * cols; }
  int64_t channels() const { return tokens.size(-1); }
};

/// Per-patch channel mean or population variance. `patch` must divide H and W.
PatchStatsSequence patch_statistics(const torch::Tensor& feature_map, int64_t patch, StatKind kind);

/// Linear projections for statistic cross-attention. Weights are (C, C) in
/// `torch::nn::functional::linear` layout; biases may be undefined.
struct AttentionWeights {
  torch::Tensor query_weight, query_bias;
  torch::Tensor key_weight, key_bias;
  torch::Tensor value_weight, value_bias;
  int64_t heads = 1;
};

enum class AttentionMode {
  softmax,
  uniform,  // every query attends equally to every key; test hook
};

/// Cross-attention with queries from the backbone tokens and keys/values from
/// the condition tokens. The output keeps the backbone sequence length and grid.
PatchStatsSequence fuse_statistics(const PatchStatsSequence& backbone,
                                   const PatchStatsSequence& cond,
                                   const AttentionWeights& weights,
                                   AttentionMode mode = AttentionMode::softmax);

/// Drops the global token, reshapes to the patch grid and bilinearly upsamples
/// (half-pixel centres) to height x width. Returns (C, H, W) or (B, C, H, W).
torch::Tensor tokens_to_map(const PatchStatsSequence& stats, int64_t height, int64_t width);

/// Per-channel spatial standardisation without affine parameters.
torch::Tensor instance_standardize(const torch::Tensor& x, double eps = 1e-5);

/// X + projection(norm(X) * sigma_f + mu_f).
torch::Tensor inject(const torch::Tensor& backbone_map, const PatchStatsSequence& fused_mean,
                     const PatchStatsSequence& fused_var, torch::nn::Conv2d& projection);

struct StfmConfig {
  int64_t mean_patch = 8;
  int64_t var_patch = 2;
  int64_t heads = 1;
  bool zero_init_output = true;
};

/// 8/2 at 32, 4/2 at 16, 4/1 at 8, 6/2 for sides divisible by 6.
StfmConfig default_stfm_config(int64_t resolution);

void validate(const StfmConfig& config, int64_t resolution);

/// Spoofing style fusion block for one backbone resolution.
///
/// When the condition maps have a different channel count than the backbone,
/// a 1x1 adapter maps them onto the backbone width before statistics.
class StfmBlockImpl : public torch::nn::Module {
 public:
  StfmBlockImpl(int64_t channels, int64_t cond_channels, int64_t resolution, StfmConfig config);

  /// `cond_map == nullptr` is the pass-through (unconditional) path. `keep`
  /// optionally masks the injected residual per sample.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor* cond_map,
                        const torch::Tensor& keep = {});

  AttentionWeights mean_weights() const;
  AttentionWeights var_weights() const;
  const StfmConfig& config() const { return config_; }

  torch::nn::Linear mean_q{nullptr}, mean_k{nullptr}, mean_v{nullptr};
  torch::nn::Linear var_q{nullptr}, var_k{nullptr}, var_v{nullptr};
  torch::nn::Conv2d cond_adapter{nullptr};
  torch::nn::Conv2d projection{nullptr};

 private:
  StfmConfig config_;
  int64_t resolution_;
};
TORCH_MODULE(StfmBlock);

}  // namespace spoofsynth
