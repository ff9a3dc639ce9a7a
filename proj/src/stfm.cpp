#include "spoofsynth/stfm.hpp"

#include "spoofsynth/common.hpp"

#include <cmath>
#include <string>

namespace spoofsynth {

namespace F = torch::nn::functional;

PatchStatsSequence patch_statistics(const torch::Tensor& feature_map, int64_t patch, StatKind kind) {
  require(feature_map.dim() == 3 || feature_map.dim() == 4, "feature map must be (C,H,W) or (B,C,H,W)");
  const bool batched = feature_map.dim() == 4;
  const auto x = batched ? feature_map : feature_map.unsqueeze(0);
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  require(patch >= 1, "patch size must be positive");
  if (h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument("patch size " + std::to_string(patch) + " does not divide " +
                                std::to_string(h) + "x" + std::to_string(w) + " map");
  }
  const int64_t rows = h / patch, cols = w / patch;

  auto patches = x.reshape({b, c, rows, patch, cols, patch})
                     .permute({0, 2, 4, 1, 3, 5})
                     .reshape({b, rows * cols, c, patch * patch});
  auto flat = x.reshape({b, 1, c, h * w});
  torch::Tensor local, global;
  if (kind == StatKind::mean) {
    local = patches.mean(-1);
    global = flat.mean(-1);
  } else {
    local = patches.var(-1, /*unbiased=*/false);
    global = flat.var(-1, /*unbiased=*/false);
  }
  auto tokens = torch::cat({local, global}, 1);
  return {batched ? tokens : tokens.squeeze(0), rows, cols, kind};
}

PatchStatsSequence fuse_statistics(const PatchStatsSequence& backbone, const PatchStatsSequence& cond,
                                   const AttentionWeights& weights, AttentionMode mode) {
  require(backbone.kind == cond.kind, "cannot fuse mean statistics with variance statistics");
  require(backbone.channels() == cond.channels(), "backbone and condition channel widths differ");
  require(backbone.tokens.dim() == cond.tokens.dim(), "backbone and condition batch layout differ");
  const bool batched = backbone.tokens.dim() == 3;
  const auto q_in = batched ? backbone.tokens : backbone.tokens.unsqueeze(0);
  const auto kv_in = batched ? cond.tokens : cond.tokens.unsqueeze(0);
  require(q_in.size(0) == kv_in.size(0), "backbone and condition batch sizes differ");

  const int64_t b = q_in.size(0), lq = q_in.size(1), lk = kv_in.size(1), c = q_in.size(2);
  const int64_t heads = weights.heads;
  require(heads >= 1 && c % heads == 0, "attention heads must divide the channel count");
  const int64_t d = c / heads;

  auto split = [&](const torch::Tensor& t, int64_t len) {
    return t.reshape({b, len, heads, d}).transpose(1, 2);  // (B, h, L, d)
  };
  auto v = split(F::linear(kv_in, weights.value_weight, weights.value_bias), lk);

  torch::Tensor out;
  if (mode == AttentionMode::uniform) {
    out = v.mean(2, /*keepdim=*/true).expand({b, heads, lq, d});
  } else {
    auto q = split(F::linear(q_in, weights.query_weight, weights.query_bias), lq);
    auto k = split(F::linear(kv_in, weights.key_weight, weights.key_bias), lk);
    auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(d));
    out = torch::matmul(torch::softmax(scores, -1), v);
  }
  out = out.transpose(1, 2).reshape({b, lq, c});
  return {batched ? out : out.squeeze(0), backbone.rows, backbone.cols, backbone.kind};
}

torch::Tensor tokens_to_map(const PatchStatsSequence& stats, int64_t height, int64_t width) {
  const bool batched = stats.tokens.dim() == 3;
  const auto tokens = batched ? stats.tokens : stats.tokens.unsqueeze(0);
  require(tokens.size(1) == stats.num_patches() + 1, "token count does not match the patch grid");
  const int64_t b = tokens.size(0), c = tokens.size(2);
  auto grid = tokens.narrow(1, 0, stats.num_patches()).transpose(1, 2).reshape({b, c, stats.rows, stats.cols});
  auto up = F::interpolate(grid, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{height, width})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  return batched ? up : up.squeeze(0);
}

torch::Tensor instance_standardize(const torch::Tensor& x, double eps) {
  const auto mean = x.mean({-2, -1}, /*keepdim=*/true);
  const auto var = x.var({-2, -1}, /*unbiased=*/false, /*keepdim=*/true);
  return (x - mean) / torch::sqrt(var + eps);
}

namespace {

torch::Tensor style_residual(const torch::Tensor& x, const PatchStatsSequence& fused_mean,
                             const PatchStatsSequence& fused_var, torch::nn::Conv2d& projection) {
  const int64_t h = x.size(-2), w = x.size(-1);
  for (const auto* s : {&fused_mean, &fused_var}) {
    require(s->rows >= 1 && s->cols >= 1 && h % s->rows == 0 && w % s->cols == 0,
            "fused statistics grid is inconsistent with the feature map");
  }
  const auto mu = tokens_to_map(fused_mean, h, w);
  const auto sigma = tokens_to_map(fused_var, h, w);
  const bool batched = x.dim() == 4;
  auto modulated = instance_standardize(x) * sigma + mu;
  if (!batched) return projection->forward(modulated.unsqueeze(0)).squeeze(0);
  return projection->forward(modulated);
}

}  // namespace

torch::Tensor inject(const torch::Tensor& backbone_map, const PatchStatsSequence& fused_mean,
                     const PatchStatsSequence& fused_var, torch::nn::Conv2d& projection) {
  require(backbone_map.dim() == 3 || backbone_map.dim() == 4, "backbone map must be (C,H,W) or (B,C,H,W)");
  require(fused_mean.channels() == backbone_map.size(-3) && fused_var.channels() == backbone_map.size(-3),
          "fused statistics channel width differs from the backbone map");
  return backbone_map + style_residual(backbone_map, fused_mean, fused_var, projection);
}

StfmConfig default_stfm_config(int64_t resolution) {
  StfmConfig c;
  switch (resolution) {
    case 32: c.mean_patch = 8; c.var_patch = 2; break;
    case 16: c.mean_patch = 4; c.var_patch = 2; break;
    case 8: c.mean_patch = 4; c.var_patch = 1; break;
    default:
      if (resolution % 6 == 0) {
        c.mean_patch = 6;
        c.var_patch = 2;
      } else {
        c.mean_patch = std::max<int64_t>(1, resolution / 4);
        c.var_patch = std::max<int64_t>(1, resolution / 16);
      }
  }
  return c;
}

void validate(const StfmConfig& config, int64_t resolution) {
  require(config.var_patch >= 1 && config.mean_patch >= config.var_patch,
          "STFM requires mean_patch >= var_patch >= 1");
  require(resolution % config.mean_patch == 0 && resolution % config.var_patch == 0,
          "STFM patch sizes must divide the feature map side " + std::to_string(resolution));
  require(config.heads >= 1, "STFM needs at least one attention head");
}

StfmBlockImpl::StfmBlockImpl(int64_t channels, int64_t cond_channels, int64_t resolution, StfmConfig config)
    : config_(config), resolution_(resolution) {
  validate(config_, resolution_);
  require(channels % config_.heads == 0, "STFM heads must divide the channel count");
  auto linear = [&](const char* name) {
    return register_module(name, torch::nn::Linear(channels, channels));
  };
  mean_q = linear("mean_q");
  mean_k = linear("mean_k");
  mean_v = linear("mean_v");
  var_q = linear("var_q");
  var_k = linear("var_k");
  var_v = linear("var_v");
  if (cond_channels != channels) {
    cond_adapter = register_module("cond_adapter", torch::nn::Conv2d(torch::nn::Conv2dOptions(cond_channels, channels, 1)));
  }
  projection = register_module("projection",
                               torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  if (config_.zero_init_output) {
    torch::NoGradGuard guard;
    projection->weight.zero_();
    projection->bias.zero_();
  }
}

AttentionWeights StfmBlockImpl::mean_weights() const {
  return {mean_q->weight, mean_q->bias, mean_k->weight, mean_k->bias, mean_v->weight, mean_v->bias, config_.heads};
}

AttentionWeights StfmBlockImpl::var_weights() const {
  return {var_q->weight, var_q->bias, var_k->weight, var_k->bias, var_v->weight, var_v->bias, config_.heads};
}

torch::Tensor StfmBlockImpl::forward(const torch::Tensor& x, const torch::Tensor* cond_map,
                                     const torch::Tensor& keep) {
  if (cond_map == nullptr) return x;
  require(x.dim() == 4, "STFM block expects (B, C, H, W)");
  require(x.size(-1) == resolution_ && cond_map->size(-1) == resolution_,
          "STFM condition resolution mismatch at " + std::to_string(resolution_));
  const auto cond = cond_adapter ? cond_adapter->forward(*cond_map) : *cond_map;

  const auto mean_f = fuse_statistics(patch_statistics(x, config_.mean_patch, StatKind::mean),
                                      patch_statistics(cond, config_.mean_patch, StatKind::mean),
                                      mean_weights());
  const auto var_f = fuse_statistics(patch_statistics(x, config_.var_patch, StatKind::variance),
                                     patch_statistics(cond, config_.var_patch, StatKind::variance),
                                     var_weights());
  auto residual = style_residual(x, mean_f, var_f, projection);
  if (keep.defined()) residual = residual * keep.to(residual.scalar_type()).view({-1, 1, 1, 1});
  return x + residual;
}

}  // namespace spoofsynth
