#pragma once

#include "spoofsynth/noise_predictor.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace spoofsynth {

enum class ScheduleKind { linear };

/// Fixed variance schedule. Timesteps are 1-based: `beta(1)` is the first step.
class NoiseSchedule {
 public:
  /// Builds from explicit betas. Accepts beta in [0, 1) so that degenerate
  /// zero-variance steps can be expressed; `build_schedule` is stricter.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int64_t steps() const { return static_cast<int64_t>(betas_.size()); }
  double beta(int64_t t) const { return betas_.at(index(t)); }
  double alpha(int64_t t) const { return alphas_.at(index(t)); }
  double alpha_bar(int64_t t) const { return alpha_bars_.at(index(t)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  void check_timestep(int64_t t) const;

 private:
  std::size_t index(int64_t t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

/// Linear beta schedule. Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule build_schedule(int64_t steps, double beta_start, double beta_end,
                             ScheduleKind kind = ScheduleKind::linear);

/// Closed-form q(x_t | x_0): sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
torch::Tensor forward_diffuse(const torch::Tensor& x0, int64_t t, const torch::Tensor& eps,
                              const NoiseSchedule& schedule);

/// Per-sample timesteps; `t` is (B,) int64 and x0 is (B, ...).
torch::Tensor forward_diffuse(const torch::Tensor& x0, const torch::Tensor& t,
                              const torch::Tensor& eps, const NoiseSchedule& schedule);

/// One Markov step of q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I).
torch::Tensor forward_step(const torch::Tensor& x_prev, int64_t t, const NoiseSchedule& schedule,
                           torch::Generator& rng);

/// Epsilon-MSE on the noised spoof target with the clean live image as the
/// extra input channels. `t` is (B,) int64, eps matches `spoof`.
torch::Tensor training_loss(NoisePredictor& denoiser, const torch::Tensor& live,
                            const torch::Tensor& spoof, const ConditionStack* cond,
                            const torch::Tensor& t, const torch::Tensor& eps,
                            const NoiseSchedule& schedule);

/// Ancestral DDPM step with variance beta_t. `z` is the standard-normal draw,
/// ignored at t == 1.
torch::Tensor reverse_step(const torch::Tensor& eps_hat, const torch::Tensor& x_t, int64_t t,
                           const NoiseSchedule& schedule, const torch::Tensor& z);

torch::Tensor reverse_step(const torch::Tensor& eps_hat, const torch::Tensor& x_t, int64_t t,
                           const NoiseSchedule& schedule, torch::Generator& rng);

/// uint8 (C, H, W) or (B, C, H, W) in [0, 255] -> float in [-1, 1].
torch::Tensor normalize_image(const torch::Tensor& rgb8);

/// float in [-1, 1] -> uint8 in [0, 255], clamped and rounded.
torch::Tensor denormalize_image(const torch::Tensor& x);

}  // namespace spoofsynth
