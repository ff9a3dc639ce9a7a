#pragma once

// Small CNN spoof-style classifier for judging generated images. It sees
// whole images and shares nothing with the conditioning style encoder.

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace judge {

struct JudgeOptions {
  int64_t steps = 400;
  int64_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 11;
};

class StyleJudge {
 public:
  /// Trains on images (N, 3, H, W) in [-1, 1] with style ids in [0, num_styles).
  StyleJudge(const torch::Tensor& images, const std::vector<int64_t>& styles, int64_t num_styles,
             const JudgeOptions& options = {});

  std::vector<int64_t> predict(const torch::Tensor& images) const;
  double accuracy(const torch::Tensor& images, const std::vector<int64_t>& styles) const;

 private:
  mutable torch::nn::Sequential net_{nullptr};
};

}  // namespace judge
