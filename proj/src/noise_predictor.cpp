#include "spoofsynth/noise_predictor.hpp"

#include "spoofsynth/common.hpp"

namespace spoofsynth {

std::vector<int64_t> ConditionStack::resolutions() const {
  std::vector<int64_t> out;
  out.reserve(maps.size());
  for (const auto& m : maps) out.push_back(m.size(-1));
  return out;
}

const torch::Tensor* ConditionStack::find(int64_t resolution) const {
  for (const auto& m : maps) {
    if (m.size(-1) == resolution) return &m;
  }
  return nullptr;
}

void validate(const ConditionStack& cond) {
  require(!cond.maps.empty(), "condition stack is empty");
  const int64_t batch = cond.maps.front().size(0);
  int64_t previous = 0;
  for (std::size_t i = 0; i < cond.maps.size(); ++i) {
    const auto& m = cond.maps[i];
    require(m.dim() == 4, "condition maps must be (B, C, H, W)");
    require(m.size(0) == batch, "condition maps disagree on batch size");
    require(m.size(2) == m.size(3), "condition maps must be square");
    require(i == 0 || m.size(2) < previous, "condition resolutions must strictly decrease");
    previous = m.size(2);
  }
  if (cond.keep.defined()) {
    require(cond.keep.dim() == 1 && cond.keep.size(0) == batch,
            "condition keep mask must be (B,)");
  }
}

torch::Tensor timestep_tensor(int64_t t, int64_t batch) {
  return torch::full({batch}, t, torch::kLong);
}

}  // namespace spoofsynth
