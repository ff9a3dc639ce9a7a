#include "spoofsynth/denoiser.hpp"

#include "spoofsynth/common.hpp"

#include <cmath>
#include <string>

namespace spoofsynth {

namespace F = torch::nn::functional;

namespace {

bool is_power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

std::vector<int64_t> DenoiserConfig::stfm_resolutions() const {
  std::vector<int64_t> out;
  for (int64_t l = 0; l < levels(); ++l) {
    const int64_t r = level_resolution(l);
    if (r <= stfm_max_resolution) out.push_back(r);
  }
  return out;
}

StfmConfig DenoiserConfig::stfm_config(int64_t resolution) const {
  auto it = stfm_overrides.find(resolution);
  StfmConfig c = it != stfm_overrides.end() ? it->second : default_stfm_config(resolution);
  c.heads = stfm_heads;
  c.zero_init_output = stfm_zero_init;
  return c;
}

void validate(const DenoiserConfig& c) {
  require(c.levels() >= 1, "denoiser needs at least one resolution level");
  require(c.image_size >= 8 && is_power_of_two(c.image_size), "denoiser image_size must be a power of two");
  require((c.image_size >> (c.levels() - 1)) >= 4, "too many levels for the image size");
  require(is_power_of_two(c.stfm_max_resolution), "stfm_max_resolution must be a power of two");
  require(c.res_blocks >= 1, "res_blocks must be positive");
  require(c.time_embed_dim >= 2 && c.base_channels >= 2 && c.base_channels % 2 == 0,
          "time embedding needs an even base width");
  require(c.input_channels == 6 && c.output_channels == 3, "denoiser maps 6 input channels to 3");
  for (int64_t l = 0; l < c.levels(); ++l) {
    require(c.level_channels(l) % c.groups == 0, "group count must divide every level width");
  }
  const auto res = c.stfm_resolutions();
  require(c.condition_channels.empty() || c.condition_channels.size() == res.size(),
          "condition_channels must list one width per STFM resolution");
  for (int64_t r : res) validate(c.stfm_config(r), r);
}

torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim) {
  const int64_t half = dim / 2;
  auto freqs = torch::exp(torch::arange(half, torch::kFloat64) * (-std::log(10000.0) / static_cast<double>(half)));
  auto args = t.to(torch::kFloat64).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::sin(args), torch::cos(args)}, 1).to(torch::kFloat32);
}

ResBlockImpl::ResBlockImpl(int64_t in_channels, int64_t out_channels, int64_t time_embed_dim, int64_t groups) {
  norm1 = register_module("norm1", torch::nn::GroupNorm(std::min(groups, in_channels), in_channels));
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  time_proj = register_module("time_proj", torch::nn::Linear(time_embed_dim, out_channels));
  norm2 = register_module("norm2", torch::nn::GroupNorm(groups, out_channels));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
  if (in_channels != out_channels) {
    skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& emb) {
  auto h = conv1->forward(F::silu(norm1->forward(x)));
  h = h + time_proj->forward(emb).unsqueeze(-1).unsqueeze(-1);
  h = conv2->forward(F::silu(norm2->forward(h)));
  return (skip ? skip->forward(x) : x) + h;
}

StfmBlock DenoiserNetImpl::make_stfm(const std::string& name, int64_t channels, int64_t resolution) {
  if (resolution > config_.stfm_max_resolution) return StfmBlock{nullptr};
  const auto res = config_.stfm_resolutions();
  int64_t cond_channels = channels;
  if (!config_.condition_channels.empty()) {
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (res[i] == resolution) cond_channels = config_.condition_channels[i];
    }
  }
  return register_module(name, StfmBlock(channels, cond_channels, resolution, config_.stfm_config(resolution)));
}

DenoiserNetImpl::DenoiserNetImpl(DenoiserConfig config) : config_(std::move(config)) {
  validate(config_);
  const int64_t levels = config_.levels();
  const int64_t temb = config_.time_embed_dim;
  const int64_t groups = config_.groups;

  time_fc1 = register_module("time_fc1", torch::nn::Linear(config_.base_channels, temb));
  time_fc2 = register_module("time_fc2", torch::nn::Linear(temb, temb));
  in_conv = register_module("in_conv", torch::nn::Conv2d(
      torch::nn::Conv2dOptions(config_.input_channels, config_.level_channels(0), 3).padding(1)));

  int64_t ch = config_.level_channels(0);
  for (int64_t l = 0; l < levels; ++l) {
    Stage stage;
    stage.resolution = config_.level_resolution(l);
    const int64_t out = config_.level_channels(l);
    for (int64_t r = 0; r < config_.res_blocks; ++r) {
      const auto tag = "down" + std::to_string(l) + "_" + std::to_string(r);
      stage.blocks.push_back(register_module(tag, ResBlock(ch, out, temb, groups)));
      stage.stfm.push_back(make_stfm(tag + "_stfm", out, stage.resolution));
      ch = out;
    }
    down_.push_back(std::move(stage));
    if (l + 1 < levels) {
      downsample_.push_back(register_module("downsample" + std::to_string(l),
          torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).stride(2).padding(1))));
    }
  }

  mid_.resolution = config_.level_resolution(levels - 1);
  mid_.blocks.push_back(register_module("mid", ResBlock(ch, ch, temb, groups)));
  mid_.stfm.push_back(make_stfm("mid_stfm", ch, mid_.resolution));

  for (int64_t l = levels - 1; l >= 0; --l) {
    Stage stage;
    stage.resolution = config_.level_resolution(l);
    const int64_t out = config_.level_channels(l);
    for (int64_t r = 0; r < config_.res_blocks; ++r) {
      const auto tag = "up" + std::to_string(l) + "_" + std::to_string(r);
      const int64_t in = r == 0 ? ch + out : out;
      stage.blocks.push_back(register_module(tag, ResBlock(in, out, temb, groups)));
      stage.stfm.push_back(make_stfm(tag + "_stfm", out, stage.resolution));
    }
    ch = out;
    up_.push_back(std::move(stage));
    if (l > 0) {
      upsample_.push_back(register_module("upsample" + std::to_string(l),
          torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).padding(1))));
    }
  }

  out_norm = register_module("out_norm", torch::nn::GroupNorm(groups, ch));
  out_conv = register_module("out_conv", torch::nn::Conv2d(
      torch::nn::Conv2dOptions(ch, config_.output_channels, 3).padding(1)));
}

std::vector<StfmBlock> DenoiserNetImpl::stfm_blocks() const {
  std::vector<StfmBlock> out;
  auto collect = [&](const Stage& s) {
    for (const auto& b : s.stfm) {
      if (b) out.push_back(b);
    }
  };
  for (const auto& s : down_) collect(s);
  collect(mid_);
  for (const auto& s : up_) collect(s);
  return out;
}

torch::Tensor DenoiserNetImpl::apply_stage(Stage& stage, torch::Tensor h, const torch::Tensor& emb,
                                           const ConditionStack* cond, const torch::Tensor* skip) {
  const torch::Tensor* cond_map = cond ? cond->find(stage.resolution) : nullptr;
  const torch::Tensor keep = cond ? cond->keep : torch::Tensor();
  for (std::size_t i = 0; i < stage.blocks.size(); ++i) {
    if (i == 0 && skip != nullptr) h = torch::cat({h, *skip}, 1);
    h = stage.blocks[i]->forward(h, emb);
    if (stage.stfm[i]) h = stage.stfm[i]->forward(h, cond_map, keep);
  }
  return h;
}

torch::Tensor DenoiserNetImpl::forward(const torch::Tensor& x_t, const torch::Tensor& live,
                                       const torch::Tensor& t, const ConditionStack* cond) {
  require(x_t.dim() == 4 && x_t.size(1) == 3, "x_t must be (B, 3, H, W)");
  if (x_t.sizes() != live.sizes()) {
    throw std::invalid_argument("x_t and live image shapes differ");
  }
  require(x_t.size(2) == config_.image_size && x_t.size(3) == config_.image_size,
          "input resolution differs from the denoiser image_size " + std::to_string(config_.image_size));
  require(t.dim() == 1 && t.size(0) == x_t.size(0), "timestep tensor must be (B,)");
  if (cond != nullptr) {
    validate(*cond);
    if (cond->resolutions() != config_.stfm_resolutions()) {
      throw std::invalid_argument("condition stack resolutions do not match the STFM injection points");
    }
    require(cond->maps.front().size(0) == x_t.size(0), "condition batch differs from input batch");
  }

  auto emb = timestep_embedding(t, config_.base_channels).to(x_t.scalar_type());
  emb = time_fc2->forward(F::silu(time_fc1->forward(emb)));

  auto h = in_conv->forward(torch::cat({x_t, live}, 1));
  std::vector<torch::Tensor> skips;
  for (std::size_t l = 0; l < down_.size(); ++l) {
    h = apply_stage(down_[l], h, emb, cond, nullptr);
    skips.push_back(h);
    if (l < downsample_.size()) h = downsample_[l]->forward(h);
  }
  h = apply_stage(mid_, h, emb, cond, nullptr);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    const auto& skip = skips[skips.size() - 1 - i];
    h = apply_stage(up_[i], h, emb, cond, &skip);
    if (i < upsample_.size()) {
      h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
      h = upsample_[i]->forward(h);
    }
  }
  return out_conv->forward(F::silu(out_norm->forward(h)));
}

}  // namespace spoofsynth
