#include "spoofsynth/diffusion.hpp"

#include "spoofsynth/common.hpp"

#include <cmath>
#include <string>

namespace spoofsynth {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  require(!betas.empty(), "noise schedule needs at least one step");
  NoiseSchedule s;
  s.betas_ = std::move(betas);
  s.alphas_.reserve(s.betas_.size());
  s.alpha_bars_.reserve(s.betas_.size());
  double running = 1.0;
  for (double b : s.betas_) {
    require(std::isfinite(b) && b >= 0.0 && b < 1.0, "beta must lie in [0, 1)");
    s.alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bars_.push_back(running);
  }
  return s;
}

void NoiseSchedule::check_timestep(int64_t t) const {
  if (t < 1 || t > steps()) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                std::to_string(steps()) + "]");
  }
}

std::size_t NoiseSchedule::index(int64_t t) const {
  check_timestep(t);
  return static_cast<std::size_t>(t - 1);
}

NoiseSchedule build_schedule(int64_t steps, double beta_start, double beta_end, ScheduleKind kind) {
  require(steps >= 1, "schedule steps must be positive");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "schedule requires 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  switch (kind) {
    case ScheduleKind::linear:
      for (int64_t i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
      }
      break;
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

// (B,) timesteps -> coefficient tensor shaped (B, 1, ..., 1) for broadcasting.
torch::Tensor gather_coeff(const std::vector<double>& table, const torch::Tensor& t,
                           const torch::Tensor& like, double (*fn)(double)) {
  require(t.dim() == 1 && t.size(0) == like.size(0), "timestep tensor must be (B,)");
  auto ts = t.to(torch::kLong).contiguous();
  const auto* tp = ts.data_ptr<int64_t>();
  std::vector<double> values(static_cast<std::size_t>(ts.size(0)));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int64_t step = tp[i];
    if (step < 1 || step > static_cast<int64_t>(table.size())) {
      throw std::invalid_argument("timestep " + std::to_string(step) + " out of range");
    }
    values[i] = fn(table[static_cast<std::size_t>(step - 1)]);
  }
  std::vector<int64_t> shape(static_cast<std::size_t>(like.dim()), 1);
  shape[0] = ts.size(0);
  return torch::tensor(values, torch::kFloat64).to(like.scalar_type()).view(shape);
}

}  // namespace

torch::Tensor forward_diffuse(const torch::Tensor& x0, int64_t t, const torch::Tensor& eps,
                              const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_diffuse");
  const double ab = schedule.alpha_bar(t);
  return x0 * std::sqrt(ab) + eps * std::sqrt(1.0 - ab);
}

torch::Tensor forward_diffuse(const torch::Tensor& x0, const torch::Tensor& t,
                              const torch::Tensor& eps, const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_diffuse");
  const auto signal = gather_coeff(schedule.alpha_bars(), t, x0, [](double ab) { return std::sqrt(ab); });
  const auto noise = gather_coeff(schedule.alpha_bars(), t, x0, [](double ab) { return std::sqrt(1.0 - ab); });
  return x0 * signal + eps * noise;
}

torch::Tensor forward_step(const torch::Tensor& x_prev, int64_t t, const NoiseSchedule& schedule,
                           torch::Generator& rng) {
  const double beta = schedule.beta(t);
  auto z = torch::randn(x_prev.sizes(), rng, x_prev.options());
  return x_prev * std::sqrt(1.0 - beta) + z * std::sqrt(beta);
}

torch::Tensor training_loss(NoisePredictor& denoiser, const torch::Tensor& live,
                            const torch::Tensor& spoof, const ConditionStack* cond,
                            const torch::Tensor& t, const torch::Tensor& eps,
                            const NoiseSchedule& schedule) {
  require_same_shape(live, spoof, "training_loss");
  const auto x_t = forward_diffuse(spoof, t, eps, schedule);
  const auto eps_hat = denoiser.predict_noise(x_t, live, t, cond);
  require_same_shape(eps_hat, eps, "training_loss: denoiser output");
  return torch::mse_loss(eps_hat, eps);
}

torch::Tensor reverse_step(const torch::Tensor& eps_hat, const torch::Tensor& x_t, int64_t t,
                           const NoiseSchedule& schedule, const torch::Tensor& z) {
  require_same_shape(eps_hat, x_t, "reverse_step");
  const double beta = schedule.beta(t);
  const double alpha = schedule.alpha(t);
  const double abar = schedule.alpha_bar(t);
  // beta == 0 makes 1 - abar possibly 0; the eps term vanishes in that case.
  const double eps_coeff = beta == 0.0 ? 0.0 : beta / std::sqrt(1.0 - abar);
  auto mean = (x_t - eps_hat * eps_coeff) * (1.0 / std::sqrt(alpha));
  if (t == 1 || beta == 0.0) return mean;
  require_same_shape(z, x_t, "reverse_step: noise");
  return mean + z * std::sqrt(beta);
}

torch::Tensor reverse_step(const torch::Tensor& eps_hat, const torch::Tensor& x_t, int64_t t,
                           const NoiseSchedule& schedule, torch::Generator& rng) {
  schedule.check_timestep(t);
  if (t == 1) return reverse_step(eps_hat, x_t, t, schedule, torch::Tensor());
  auto z = torch::randn(x_t.sizes(), rng, x_t.options());
  return reverse_step(eps_hat, x_t, t, schedule, z);
}

torch::Tensor normalize_image(const torch::Tensor& rgb8) {
  require(rgb8.scalar_type() == torch::kUInt8, "normalize_image expects uint8 pixels");
  return rgb8.to(torch::kFloat32) / 127.5 - 1.0;
}

torch::Tensor denormalize_image(const torch::Tensor& x) {
  return ((x.clamp(-1.0, 1.0) + 1.0) * 127.5).round().clamp(0, 255).to(torch::kUInt8);
}

}  // namespace spoofsynth
