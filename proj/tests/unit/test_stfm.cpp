#include "doctest_torch.hpp"
#include "test_helpers.hpp"
#include "oracles.hpp"
#include "spoofsynth/stfm.hpp"

#include <random>
#include <stdexcept>

using namespace spoofsynth;

namespace {

oracle::Linear to_linear(const torch::Tensor& w, const torch::Tensor& b) {
  return {w.size(0), w.size(1), testing::to_vector(w), b.defined() ? testing::to_vector(b) : std::vector<double>{}};
}

oracle::Tokens to_tokens(const torch::Tensor& t) {
  oracle::Tokens out;
  for (int64_t i = 0; i < t.size(0); ++i) out.push_back(testing::to_vector(t[i]));
  return out;
}

double token_diff(const oracle::Tokens& a, const torch::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < a[i].size(); ++c)
      worst = std::max(worst, std::abs(a[i][c] - b[static_cast<int64_t>(i)][static_cast<int64_t>(c)].item<double>()));
  return worst;
}

}  // namespace

TEST_SUITE("stfm") {
  TEST_CASE("patch statistics match the brute-force oracle") {
    std::mt19937 rng(5);
    const int64_t sides[] = {4, 8, 12, 16};
    for (int trial = 0; trial < 20; ++trial) {
      const int64_t side = sides[rng() % 4];
      std::vector<int64_t> patches;
      for (int64_t p = 1; p <= side; ++p) if (side % p == 0) patches.push_back(p);
      const int64_t patch = patches[rng() % patches.size()];
      const int kind = static_cast<int>(rng() % 2);
      const auto map = torch::randn({3, side, side}, torch::kFloat64) * 2 + 0.5;
      const auto got = patch_statistics(map, patch, kind ? StatKind::variance : StatKind::mean);
      CHECK(got.rows == side / patch);
      CHECK(got.tokens.size(0) == got.num_patches() + 1);
      CHECK(token_diff(oracle::patch_stats(testing::to_map(map), patch, kind), got.tokens) < 1e-10);
    }
  }

  TEST_CASE("batched statistics agree with per-map statistics") {
    const auto maps = torch::randn({3, 4, 8, 8});
    const auto batched = patch_statistics(maps, 4, StatKind::variance);
    for (int64_t i = 0; i < 3; ++i) {
      CHECK(torch::allclose(batched.tokens[i], patch_statistics(maps[i], 4, StatKind::variance).tokens));
    }
  }

  TEST_CASE("non-dividing patch size is rejected") {
    CHECK_THROWS_AS(patch_statistics(torch::zeros({2, 10, 10}), 3, StatKind::mean), std::invalid_argument);
  }

  TEST_CASE("attention matches the oracle") {
    for (int64_t heads : {1, 2, 4}) {
      const int64_t c = 8;
      auto lin = [&] { return torch::nn::Linear(torch::nn::LinearOptions(c, c)); };
      auto q = lin(), k = lin(), v = lin();
      q->to(torch::kFloat64);
      k->to(torch::kFloat64);
      v->to(torch::kFloat64);
      const auto backbone = patch_statistics(torch::randn({c, 8, 8}, torch::kFloat64), 4, StatKind::mean);
      const auto cond = patch_statistics(torch::randn({c, 8, 8}, torch::kFloat64), 4, StatKind::mean);
      const AttentionWeights w{q->weight, q->bias, k->weight, k->bias, v->weight, v->bias, heads};
      const auto got = fuse_statistics(backbone, cond, w);
      CHECK(got.rows == backbone.rows);
      const auto want = oracle::attention(to_tokens(backbone.tokens), to_tokens(cond.tokens), to_linear(q->weight, q->bias),
                                          to_linear(k->weight, k->bias), to_linear(v->weight, v->bias), heads);
      CHECK(token_diff(want, got.tokens) < 1e-10);
    }
  }

  TEST_CASE("uniform attention averages the values") {
    const int64_t c = 4;
    const auto eye = torch::eye(c);
    const AttentionWeights w{eye, {}, eye, {}, eye, {}, 1};
    const auto backbone = patch_statistics(torch::randn({c, 4, 4}), 2, StatKind::mean);
    const auto cond = patch_statistics(torch::randn({c, 4, 4}), 2, StatKind::mean);
    const auto fused = fuse_statistics(backbone, cond, w, AttentionMode::uniform);
    const auto avg = cond.tokens.mean(0);
    for (int64_t i = 0; i < fused.tokens.size(0); ++i) CHECK(torch::allclose(fused.tokens[i], avg));
  }

  TEST_CASE("mismatched statistic kinds are rejected") {
    const auto eye = torch::eye(2);
    const AttentionWeights w{eye, {}, eye, {}, eye, {}, 1};
    const auto m = patch_statistics(torch::randn({2, 4, 4}), 2, StatKind::mean);
    const auto v = patch_statistics(torch::randn({2, 4, 4}), 2, StatKind::variance);
    CHECK_THROWS_AS(fuse_statistics(m, v, w), std::invalid_argument);
  }

  TEST_CASE("token maps upsample like the bilinear oracle") {
    const auto tokens = patch_statistics(torch::randn({2, 16, 16}, torch::kFloat64), 4, StatKind::mean);
    const auto map = tokens_to_map(tokens, 16, 16);
    CHECK((map.sizes() == torch::IntArrayRef({2, 16, 16})));
    for (int64_t c = 0; c < 2; ++c) {
      const auto grid = testing::to_vector(tokens.tokens.narrow(0, 0, 16).select(1, c));
      const auto want = oracle::bilinear(grid, 4, 4, 16, 16);
      const auto got = testing::to_vector(map[c]);
      double worst = 0.0;
      for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(want[i] - got[i]));
      CHECK(worst < 1e-12);
    }
  }

  TEST_CASE("zero-initialised block is the identity") {
    StfmBlock block(16, 16, 16, default_stfm_config(16));
    const auto x = torch::randn({2, 16, 16, 16});
    const auto cond = torch::randn({2, 16, 16, 16});
    CHECK(torch::equal(block->forward(x, &cond), x));
    CHECK(torch::equal(block->forward(x, nullptr), x));
  }

  TEST_CASE("trained projection changes features unless masked out") {
    StfmBlock block(8, 4, 8, default_stfm_config(8));
    {
      torch::NoGradGuard g;
      block->projection->weight.normal_(0, 0.1);
    }
    const auto x = torch::randn({2, 8, 8, 8});
    const auto cond = torch::randn({2, 4, 8, 8});
    const auto out = block->forward(x, &cond);
    CHECK_FALSE(torch::allclose(out, x));
    const auto keep = torch::tensor({0.0f, 1.0f});
    const auto masked = block->forward(x, &cond, keep);
    CHECK(torch::equal(masked[0], x[0]));
    CHECK(torch::allclose(masked[1], out[1]));
  }

  TEST_CASE("inject with zero projection leaves the map unchanged") {
    torch::nn::Conv2d proj(torch::nn::Conv2dOptions(4, 4, 3).padding(1));
    {
      torch::NoGradGuard g;
      proj->weight.zero_();
      proj->bias.zero_();
    }
    const auto x = torch::randn({4, 8, 8});
    const auto m = patch_statistics(x, 4, StatKind::mean);
    const auto v = patch_statistics(x, 2, StatKind::variance);
    CHECK(torch::equal(inject(x, m, v, proj), x));
  }

  TEST_CASE("default patch sizes") {
    CHECK(default_stfm_config(32).mean_patch == 8);
    CHECK(default_stfm_config(32).var_patch == 2);
    CHECK(default_stfm_config(16).mean_patch == 4);
    CHECK(default_stfm_config(24).mean_patch == 6);
    StfmConfig bad;
    bad.mean_patch = 1;
    bad.var_patch = 2;
    CHECK_THROWS_AS(validate(bad, 16), std::invalid_argument);
  }
}
