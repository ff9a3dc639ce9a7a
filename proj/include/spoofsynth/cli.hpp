#pragma once

#include "spoofsynth/data.hpp"
#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/noise_predictor.hpp"
#include "spoofsynth/sampler.hpp"
#include "spoofsynth/style_encoder.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace spoofsynth {

/// Conjunction of `field op value` clauses separated by commas, e.g.
/// "domain_id=1,identity_id<50". Fields: identity_id, domain_id. Operators:
/// = != < <= > >=. "all" or "" matches every live record.
class LiveFilter {
 public:
  static LiveFilter parse(const std::string& expr);
  bool matches(const SampleRecord& record) const;

 private:
  struct Clause {
    std::string field;
    std::string op;
    int64_t value = 0;
  };
  std::vector<Clause> clauses_;
};

struct GenerationItem {
  std::uint64_t index = 0;
  SampleRecord live;
  SampleRecord guide;
};

/// Every live record passing the filter, each with a guide of `guide_style`
/// drawn uniformly from a stream seeded by (seed, index).
std::vector<GenerationItem> plan_generation(const std::vector<SampleRecord>& records, const LiveFilter& filter,
                                            int64_t guide_style, std::uint64_t seed);

/// Edit-samples every planned item; returns (N, 3, H, W) in [-1, 1]. Each item
/// draws from its own noise stream, so `batch_size` only changes the rounding
/// of batched kernels.
torch::Tensor run_generation(const std::vector<GenerationItem>& items, const SamplerConfig& config,
                             const NoiseSchedule& schedule, NoisePredictor& denoiser, const StyleEncoder& encoder,
                             int64_t batch_size = 8);

/// Entry point of the `spoofsynth` command. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace spoofsynth
