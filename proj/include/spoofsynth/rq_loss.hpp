#pragma once

#include <torch/torch.h>

namespace spoofsynth {

/// Relative-quality margin parameters. s_live / s_spoof scale the margins of
/// live and spoof samples; m scales the target logit.
struct MarginParams {
  double s_live = 0.4;
  double s_spoof = 0.2;
  double m = 30.0;
  /// Also multiply non-target logits by m (the usual margin-softmax form).
  /// Off by default: only the target logit is scaled.
  bool scale_non_target = false;
};

void validate(const MarginParams& params);

struct Margins {
  double psi;    // angular margin, -s * b_rq
  double omega;  // additive margin, s * (1 + b_rq)
};

Margins margins(double b_rq, double s);

/// cos(theta - s * b_rq) - s * (1 + b_rq)
double g_theta(double theta, double s, double b_rq);

/// cos(theta) - g(theta): the additive margin the angular + additive pair amounts to.
double equivalent_margin(double b_rq, double theta, double s);

/// Cosine similarity between L2-normalised features (B, D) and class weights (K, D).
torch::Tensor cosine_logits(const torch::Tensor& features, const torch::Tensor& class_weights);

/// Mean negative log-likelihood under the relative-quality margin softmax.
///
/// cos_theta is (B, K), labels (B,) int64, b_rq (B,) and is_live (B,) bool.
/// Differentiable with respect to cos_theta.
torch::Tensor rq_loss(const torch::Tensor& cos_theta, const torch::Tensor& labels, const torch::Tensor& b_rq,
                      const torch::Tensor& is_live, const MarginParams& params);

/// Logits used at inference: m * cos_theta for every class.
torch::Tensor inference_logits(const torch::Tensor& cos_theta, const MarginParams& params);

}  // namespace spoofsynth
