#include "doctest_torch.hpp"
#include "test_helpers.hpp"
#include "spoofsynth/denoiser.hpp"

#include <stdexcept>

using namespace spoofsynth;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.image_size = 32;
  c.base_channels = 8;
  c.channel_multipliers = {1, 2};
  c.res_blocks = 1;
  c.time_embed_dim = 32;
  c.groups = 4;
  c.stfm_max_resolution = 32;
  return c;
}

ConditionStack condition_for(const DenoiserConfig& c, int64_t batch) {
  ConditionStack cond;
  for (auto r : c.stfm_resolutions()) {
    const int64_t level = r == 32 ? 0 : 1;
    cond.maps.push_back(torch::randn({batch, c.level_channels(level), r, r}));
  }
  return cond;
}

}  // namespace

TEST_SUITE("denoiser") {
  TEST_CASE("stfm resolutions follow the threshold") {
    DenoiserConfig c;
    CHECK((c.stfm_resolutions() == std::vector<int64_t>{32, 16}));
    c.stfm_max_resolution = 16;
    CHECK((c.stfm_resolutions() == std::vector<int64_t>{16}));
  }

  TEST_CASE("timestep embedding") {
    const auto e = timestep_embedding(torch::tensor({1L, 2L, 500L}), 16);
    CHECK((e.sizes() == torch::IntArrayRef({3, 16})));
    CHECK_FALSE(torch::allclose(e[0], e[1]));
    CHECK(e.abs().max().item<double>() <= 1.0 + 1e-6);
  }

  TEST_CASE("output shape and zero-initialised conditioning") {
    const auto cfg = small_config();
    DenoiserNet net(cfg);
    net->eval();
    const auto x = torch::randn({2, 3, 32, 32});
    const auto live = torch::randn({2, 3, 32, 32});
    const auto t = torch::tensor({5L, 700L});
    const auto cond = condition_for(cfg, 2);
    torch::NoGradGuard g;
    const auto u = net->forward(x, live, t, nullptr);
    CHECK(u.sizes() == x.sizes());
    CHECK(torch::equal(net->forward(x, live, t, &cond), u));
    CHECK(net->stfm_blocks().size() >= 2 * cfg.stfm_resolutions().size());
  }

  TEST_CASE("the live image and timestep influence the output") {
    DenoiserNet net(small_config());
    const auto x = torch::randn({1, 3, 32, 32});
    const auto live = torch::randn({1, 3, 32, 32});
    torch::NoGradGuard g;
    const auto a = net->forward(x, live, torch::tensor({10L}), nullptr);
    CHECK_FALSE((torch::allclose(a, net->forward(x, torch::zeros_like(live), torch::tensor({10L}), nullptr))));
    CHECK_FALSE((torch::allclose(a, net->forward(x, live, torch::tensor({900L}), nullptr))));
  }

  TEST_CASE("gradients reach the STFM projection") {
    const auto cfg = small_config();
    DenoiserNet net(cfg);
    const auto cond = condition_for(cfg, 2);
    const auto out = net->forward(torch::randn({2, 3, 32, 32}), torch::randn({2, 3, 32, 32}), torch::tensor({3L, 4L}), &cond);
    out.pow(2).mean().backward();
    double grad = 0.0;
    for (auto& b : net->stfm_blocks()) grad += b->projection->weight.grad().abs().sum().item<double>();
    CHECK(grad > 0.0);
  }

  TEST_CASE("validation") {
    auto c = small_config();
    c.groups = 3;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
    c = small_config();
    c.image_size = 30;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
    c = small_config();
    c.condition_channels = {8};
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
  }
}
