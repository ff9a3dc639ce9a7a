#include "spoofsynth/style_encoder.hpp"

#include "spoofsynth/common.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace spoofsynth {

namespace F = torch::nn::functional;

std::vector<int64_t> StyleEncoderConfig::condition_channels() const {
  std::vector<int64_t> out;
  for (int64_t r : condition_resolutions) {
    for (std::size_t s = 0; s < stage_channels.size(); ++s) {
      if (stage_resolution(s) == r) out.push_back(stage_channels[s]);
    }
  }
  return out;
}

void validate(const StyleEncoderConfig& c) {
  require(c.num_styles >= 2, "style encoder needs at least two styles");
  require(!c.stage_channels.empty(), "style encoder needs at least one stage");
  require((c.image_size >> c.stage_channels.size()) >= 1, "too many encoder stages for the image size");
  require(c.stem_channels % c.groups == 0, "group count must divide the stem width");
  for (int64_t ch : c.stage_channels) require(ch % c.groups == 0, "group count must divide every stage width");
  int64_t previous = 0;
  for (std::size_t i = 0; i < c.condition_resolutions.size(); ++i) {
    const int64_t r = c.condition_resolutions[i];
    require(i == 0 || r < previous, "condition resolutions must strictly decrease");
    previous = r;
    bool found = false;
    for (std::size_t s = 0; s < c.stage_channels.size(); ++s) found = found || c.stage_resolution(s) == r;
    require(found, "condition resolution " + std::to_string(r) + " is not an encoder stage output");
  }
}

StyleEncoderNetImpl::StyleEncoderNetImpl(StyleEncoderConfig config) : config_(std::move(config)) {
  validate(config_);
  const int64_t g = config_.groups;
  stem = register_module("stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, config_.stem_channels, 3).padding(1)));
  stem_norm = register_module("stem_norm", torch::nn::GroupNorm(g, config_.stem_channels));
  int64_t in = config_.stem_channels;
  for (std::size_t s = 0; s < config_.stage_channels.size(); ++s) {
    const int64_t out = config_.stage_channels[s];
    torch::nn::Sequential main(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1)),
        torch::nn::GroupNorm(g, out),
        torch::nn::SiLU(),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1)),
        torch::nn::GroupNorm(g, out));
    stage_main_.push_back(register_module("stage" + std::to_string(s), main));
    stage_skip_.push_back(register_module("stage" + std::to_string(s) + "_skip",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).stride(2))));
    in = out;
  }
  head = register_module("head", torch::nn::Linear(in, config_.num_styles));
}

std::vector<torch::Tensor> StyleEncoderNetImpl::stages(const torch::Tensor& x) {
  require(x.dim() == 4 && x.size(1) == 3, "style encoder expects (B, 3, H, W)");
  require(x.size(2) == config_.image_size && x.size(3) == config_.image_size,
          "guide resolution differs from the encoder image_size " + std::to_string(config_.image_size));
  std::vector<torch::Tensor> out;
  auto h = F::silu(stem_norm->forward(stem->forward(x)));
  for (std::size_t s = 0; s < stage_main_.size(); ++s) {
    h = F::silu(stage_main_[s]->forward(h) + stage_skip_[s]->forward(h));
    out.push_back(h);
  }
  return out;
}

torch::Tensor StyleEncoderNetImpl::logits_from_stages(const std::vector<torch::Tensor>& stage_outputs) {
  return head->forward(stage_outputs.back().mean({2, 3}));
}

StyleEncoder::StyleEncoder(StyleEncoderNet net) : net_(std::move(net)) {
  net_->eval();
  for (auto& p : net_->parameters()) p.set_requires_grad(false);
}

ConditionStack StyleEncoder::encode_style(const torch::Tensor& guide) const {
  torch::NoGradGuard guard;
  const auto x = guide.dim() == 3 ? guide.unsqueeze(0) : guide;
  const auto outputs = net_->stages(x);
  const auto& cfg = net_->config();
  ConditionStack stack;
  for (int64_t r : cfg.condition_resolutions) {
    for (std::size_t s = 0; s < outputs.size(); ++s) {
      if (cfg.stage_resolution(s) == r) stack.maps.push_back(outputs[s]);
    }
  }
  return stack;
}

torch::Tensor StyleEncoder::classify(const torch::Tensor& images) const {
  torch::NoGradGuard guard;
  const auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
  return net_->forward(x).argmax(1);
}

StyleTrainResult train_style_encoder(const torch::Tensor& images, const std::vector<int64_t>& styles,
                                     StyleEncoderConfig config, const StyleTrainOptions& options) {
  require(images.dim() == 4 && images.size(0) == static_cast<int64_t>(styles.size()),
          "style training needs one label per image");
  const std::set<int64_t> distinct(styles.begin(), styles.end());
  if (distinct.size() < 2) {
    throw std::invalid_argument("style encoder training needs at least two distinct styles");
  }
  for (int64_t s : styles) {
    require(s >= 0 && s < config.num_styles, "style id " + std::to_string(s) + " outside [0, num_styles)");
  }
  require(options.steps >= 1 && options.batch_size >= 1, "style training needs positive steps and batch size");

  torch::manual_seed(options.seed);
  StyleEncoderNet net(config);
  net->train();
  torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(options.learning_rate));

  const auto labels = torch::tensor(styles, torch::kLong);
  const int64_t n = images.size(0);
  std::mt19937_64 rng(derive_seed(options.seed, 1));
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  std::vector<double> loss_curve;
  loss_curve.reserve(static_cast<std::size_t>(options.steps));
  for (int64_t step = 0; step < options.steps; ++step) {
    std::vector<int64_t> batch;
    while (static_cast<int64_t>(batch.size()) < std::min(options.batch_size, n)) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    const auto idx = torch::tensor(batch, torch::kLong);
    auto loss = F::cross_entropy(net->forward(images.index_select(0, idx)), labels.index_select(0, idx));
    optimizer.zero_grad();
    loss.backward();
    optimizer.step();
    const double value = loss.item<double>();
    loss_curve.push_back(value);
    if (options.on_log && (step % options.log_every == 0 || step + 1 == options.steps)) {
      options.on_log(step, value);
    }
  }

  net->eval();
  torch::NoGradGuard guard;
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += 64) {
    const int64_t len = std::min<int64_t>(64, n - start);
    auto pred = net->forward(images.narrow(0, start, len)).argmax(1);
    correct += pred.eq(labels.narrow(0, start, len)).sum().item<int64_t>();
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return StyleTrainResult{StyleEncoder(net), std::move(loss_curve), accuracy};
}

}  // namespace spoofsynth
