#include "spoofsynth/sampler.hpp"

#include "spoofsynth/common.hpp"

#include <string>
#include <vector>

namespace spoofsynth {

void validate(const SamplerConfig& config, const NoiseSchedule& schedule) {
  require(config.gamma >= 0.0, "guidance strength gamma must be non-negative");
  require(config.p_uncond >= 0.0 && config.p_uncond < 1.0, "p_uncond must lie in [0, 1)");
  if (config.t_start < 1 || config.t_start > schedule.steps()) {
    throw std::invalid_argument("t_start " + std::to_string(config.t_start) + " outside [1, " +
                                std::to_string(schedule.steps()) + "]");
  }
}

std::optional<ConditionStack> condition_dropout(const ConditionStack& cond, double p_uncond,
                                                torch::Generator& rng) {
  require(p_uncond >= 0.0 && p_uncond < 1.0, "p_uncond must lie in [0, 1)");
  const double u = torch::rand({1}, rng, torch::kFloat64).item<double>();
  if (u < p_uncond) return std::nullopt;
  return cond;
}

torch::Tensor condition_keep_mask(int64_t batch, double p_uncond, torch::Generator& rng) {
  require(p_uncond >= 0.0 && p_uncond < 1.0, "p_uncond must lie in [0, 1)");
  return (torch::rand({batch}, rng, torch::kFloat64) >= p_uncond).to(torch::kFloat32);
}

torch::Tensor guided_combination(const torch::Tensor& conditional, const torch::Tensor& unconditional,
                                 double gamma) {
  return conditional * gamma + unconditional * (1.0 - gamma);
}

torch::Tensor cfg_predict(NoisePredictor& denoiser, const torch::Tensor& x_t, const torch::Tensor& live,
                          const torch::Tensor& t, const ConditionStack& cond, double gamma) {
  require(gamma >= 0.0, "guidance strength gamma must be non-negative");
  const auto c = denoiser.predict_noise(x_t, live, t, &cond);
  const auto u = denoiser.predict_noise(x_t, live, t, nullptr);
  return guided_combination(c, u, gamma);
}

namespace {

torch::Tensor per_sample_normal(std::vector<torch::Generator>& gens, const torch::Tensor& like) {
  std::vector<torch::Tensor> draws;
  draws.reserve(gens.size());
  const auto shape = like.sizes().slice(1);
  for (auto& g : gens) draws.push_back(torch::randn(shape, g, like.options()));
  return torch::stack(draws);
}

}  // namespace

torch::Tensor edit_sample(const torch::Tensor& live, const ConditionStack& cond, const SamplerConfig& config,
                          const NoiseSchedule& schedule, NoisePredictor& denoiser,
                          std::uint64_t first_sample_index) {
  validate(config, schedule);
  require(live.dim() == 4 && live.size(1) == 3, "live images must be (B, 3, H, W)");
  validate(cond);
  require(cond.maps.front().size(0) == live.size(0), "one guide condition per live image is required");

  torch::NoGradGuard guard;
  const int64_t batch = live.size(0);
  std::vector<torch::Generator> gens;
  gens.reserve(static_cast<std::size_t>(batch));
  for (int64_t i = 0; i < batch; ++i) {
    gens.push_back(make_generator(derive_seed(config.seed, first_sample_index + static_cast<std::uint64_t>(i))));
  }

  auto x = forward_diffuse(live, config.t_start, per_sample_normal(gens, live), schedule);
  for (int64_t t = config.t_start; t >= 1; --t) {
    const auto ts = timestep_tensor(t, batch);
    const auto eps_hat = cfg_predict(denoiser, x, live, ts, cond, config.gamma);
    const auto z = t > 1 ? per_sample_normal(gens, x) : torch::Tensor();
    x = reverse_step(eps_hat, x, t, schedule, z);
  }
  return x.clamp(-1.0, 1.0);
}

torch::Tensor edit_sample(const torch::Tensor& live, const torch::Tensor& guide, const SamplerConfig& config,
                          const NoiseSchedule& schedule, NoisePredictor& denoiser, const StyleEncoder& encoder,
                          std::uint64_t first_sample_index) {
  validate(config, schedule);
  const auto live4 = live.dim() == 3 ? live.unsqueeze(0) : live;
  auto g = guide.dim() == 3 ? guide.unsqueeze(0) : guide;
  if (g.size(0) == 1 && live4.size(0) > 1) g = g.expand({live4.size(0), g.size(1), g.size(2), g.size(3)});
  require(g.sizes() == live4.sizes(), "guide and live images must share a resolution");
  return edit_sample(live4, encoder.encode_style(g), config, schedule, denoiser, first_sample_index);
}

}  // namespace spoofsynth
