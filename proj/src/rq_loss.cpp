#include "spoofsynth/rq_loss.hpp"

#include "spoofsynth/common.hpp"

#include <cmath>

namespace spoofsynth {

void validate(const MarginParams& p) {
  require(std::isfinite(p.s_live) && std::isfinite(p.s_spoof) && std::isfinite(p.m), "margin parameters must be finite");
  require(p.s_live >= 0.0 && p.s_spoof >= 0.0, "margin scales must be non-negative");
  require(p.m > 0.0, "logit scale m must be positive");
}

Margins margins(double b_rq, double s) { return {-s * b_rq, s * (1.0 + b_rq)}; }

double g_theta(double theta, double s, double b_rq) {
  return std::cos(theta - s * b_rq) - s * (1.0 + b_rq);
}

double equivalent_margin(double b_rq, double theta, double s) { return std::cos(theta) - g_theta(theta, s, b_rq); }

torch::Tensor cosine_logits(const torch::Tensor& features, const torch::Tensor& class_weights) {
  namespace F = torch::nn::functional;
  const auto f = F::normalize(features, F::NormalizeFuncOptions().dim(1));
  const auto w = F::normalize(class_weights, F::NormalizeFuncOptions().dim(1));
  return torch::matmul(f, w.t());
}

torch::Tensor rq_loss(const torch::Tensor& cos_theta, const torch::Tensor& labels, const torch::Tensor& b_rq,
                      const torch::Tensor& is_live, const MarginParams& params) {
  validate(params);
  require(cos_theta.dim() == 2, "cos_theta must be (batch, classes)");
  const int64_t batch = cos_theta.size(0), classes = cos_theta.size(1);
  require(labels.dim() == 1 && labels.size(0) == batch, "labels are misaligned with the batch");
  require(b_rq.dim() == 1 && b_rq.size(0) == batch, "b_rq is misaligned with the batch");
  require(is_live.dim() == 1 && is_live.size(0) == batch, "is_live is misaligned with the batch");
  if (batch > 0) {
    const auto lo = labels.min().item<int64_t>(), hi = labels.max().item<int64_t>();
    require(lo >= 0 && hi < classes, "label outside [0, classes)");
  }

  const auto opts = cos_theta.options();
  const auto cos = cos_theta.clamp(-1.0, 1.0);
  const auto labels_l = labels.to(torch::kLong).unsqueeze(1);
  const auto s = torch::where(is_live.to(torch::kBool), torch::full({batch}, params.s_live, opts),
                              torch::full({batch}, params.s_spoof, opts));
  const auto b = b_rq.to(cos.scalar_type());

  // cos(theta - s b) expanded so no arccos is needed; sin(theta) >= 0 on [0, pi].
  const auto cos_y = cos.gather(1, labels_l).squeeze(1);
  const auto sin_y = torch::sqrt(torch::clamp(1.0 - cos_y * cos_y, 1e-12));
  const auto shift = s * b;
  const auto g = cos_y * torch::cos(shift) + sin_y * torch::sin(shift) - s * (1.0 + b);
  const auto target_logit = g * params.m;

  auto others = params.scale_non_target ? cos * params.m : cos;
  // Replace the target column by the margin logit and take the log-softmax there.
  const auto logits = others.scatter(1, labels_l, target_logit.unsqueeze(1));
  const auto nll = torch::logsumexp(logits, 1) - target_logit;
  return nll.mean();
}

torch::Tensor inference_logits(const torch::Tensor& cos_theta, const MarginParams& params) {
  return cos_theta * params.m;
}

}  // namespace spoofsynth
