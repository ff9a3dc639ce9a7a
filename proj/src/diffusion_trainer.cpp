#include "spoofsynth/diffusion_trainer.hpp"

#include "spoofsynth/common.hpp"
#include "spoofsynth/sampler.hpp"

#include <map>
#include <random>

namespace spoofsynth {

void validate(const DiffusionTrainOptions& o) {
  require(o.steps >= 1 && o.batch_size >= 1, "diffusion training needs positive steps and batch size");
  require(o.learning_rate > 0.0, "learning rate must be positive");
  require(o.p_uncond >= 0.0 && o.p_uncond < 1.0, "p_uncond must lie in [0, 1)");
  require(o.ema_decay >= 0.0 && o.ema_decay < 1.0, "EMA decay must lie in [0, 1)");
  require(o.log_every >= 1, "log interval must be positive");
}

namespace {

ConditionStack encode_all(const StyleEncoder& encoder, const torch::Tensor& images) {
  ConditionStack all;
  std::vector<std::vector<torch::Tensor>> chunks;
  for (int64_t start = 0; start < images.size(0); start += 64) {
    const int64_t len = std::min<int64_t>(64, images.size(0) - start);
    auto stack = encoder.encode_style(images.narrow(0, start, len));
    chunks.resize(stack.maps.size());
    for (std::size_t i = 0; i < stack.maps.size(); ++i) chunks[i].push_back(stack.maps[i]);
  }
  for (auto& c : chunks) all.maps.push_back(torch::cat(c));
  return all;
}

}  // namespace

std::vector<double> train_denoiser(DenoiserNet& net, const StyleEncoder& encoder, const PairedData& data,
                                   const NoiseSchedule& schedule, const DiffusionTrainOptions& options) {
  validate(options);
  const int64_t n = data.live.size(0);
  require(n >= 1 && data.spoof.sizes() == data.live.sizes(), "paired live and spoof batches must match");
  require(static_cast<int64_t>(data.style.size()) == n, "one style per pair is required");
  require(static_cast<int64_t>(data.guide_style.size()) == data.guides.size(0), "one style per guide is required");

  std::map<int64_t, std::vector<int64_t>> pool;
  for (std::size_t i = 0; i < data.guide_style.size(); ++i) pool[data.guide_style[i]].push_back(static_cast<int64_t>(i));
  for (int64_t s : data.style) {
    if (!pool.count(s)) throw DataError("no guide image of style " + std::to_string(s));
  }

  const ConditionStack guide_maps = encode_all(encoder, data.guides);
  torch::manual_seed(options.seed);
  auto gen = make_generator(derive_seed(options.seed, 3));
  std::mt19937_64 rng(derive_seed(options.seed, 4));
  std::uniform_int_distribution<int64_t> pick_pair(0, n - 1);

  net->train();
  torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(options.learning_rate));
  std::vector<torch::Tensor> ema;
  if (options.ema_decay > 0.0) {
    for (const auto& p : net->parameters()) ema.push_back(p.detach().clone());
  }

  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(options.steps));
  const int64_t batch = std::min(options.batch_size, n);
  for (int64_t step = 0; step < options.steps; ++step) {
    std::vector<int64_t> pairs, guides;
    for (int64_t b = 0; b < batch; ++b) {
      const int64_t i = pick_pair(rng);
      const auto& candidates = pool.at(data.style[static_cast<std::size_t>(i)]);
      std::uniform_int_distribution<std::size_t> pick_guide(0, candidates.size() - 1);
      pairs.push_back(i);
      guides.push_back(candidates[pick_guide(rng)]);
    }
    const auto pi = torch::tensor(pairs, torch::kLong), gi = torch::tensor(guides, torch::kLong);
    ConditionStack cond;
    for (const auto& m : guide_maps.maps) cond.maps.push_back(m.index_select(0, gi));
    cond.keep = condition_keep_mask(batch, options.p_uncond, gen);

    const auto live = data.live.index_select(0, pi), spoof = data.spoof.index_select(0, pi);
    const auto t = torch::randint(1, schedule.steps() + 1, {batch}, gen, torch::kLong);
    const auto eps = torch::randn(spoof.sizes(), gen, spoof.options());
    auto loss = training_loss(*net, live, spoof, &cond, t, eps, schedule);
    optimizer.zero_grad();
    loss.backward();
    if (options.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(net->parameters(), options.grad_clip);
    optimizer.step();

    if (!ema.empty()) {
      torch::NoGradGuard guard;
      const auto params = net->parameters();
      for (std::size_t k = 0; k < params.size(); ++k) ema[k].mul_(options.ema_decay).add_(params[k], 1.0 - options.ema_decay);
    }
    const double value = loss.item<double>();
    curve.push_back(value);
    if (options.on_log && (step % options.log_every == 0 || step + 1 == options.steps)) options.on_log(step, value);
  }

  if (!ema.empty()) {
    torch::NoGradGuard guard;
    const auto params = net->parameters();
    for (std::size_t k = 0; k < params.size(); ++k) params[k].copy_(ema[k]);
  }
  net->eval();
  return curve;
}

}  // namespace spoofsynth
