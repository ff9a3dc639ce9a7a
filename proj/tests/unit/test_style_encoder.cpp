#include "doctest_torch.hpp"
#include "spoofsynth/data.hpp"
#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/style_encoder.hpp"

#include <stdexcept>

using namespace spoofsynth;

namespace {

StyleEncoderConfig small_config() {
  StyleEncoderConfig c;
  c.image_size = 32;
  c.num_styles = 3;
  c.stem_channels = 8;
  c.stage_channels = {8, 16, 16};
  c.condition_resolutions = {16, 8};
  c.groups = 4;
  return c;
}

}  // namespace

TEST_SUITE("style_encoder") {
  TEST_CASE("condition stack shapes") {
    const auto cfg = small_config();
    StyleEncoder enc{StyleEncoderNet(cfg)};
    CHECK((cfg.condition_channels() == std::vector<int64_t>{8, 16}));
    const auto stack = enc.encode_style(torch::zeros({3, 32, 32}));
    REQUIRE(stack.maps.size() == 2);
    CHECK((stack.maps[0].sizes() == torch::IntArrayRef({1, 8, 16, 16})));
    CHECK((stack.maps[1].sizes() == torch::IntArrayRef({1, 16, 8, 8})));
    CHECK((enc.classify(torch::zeros({4, 3, 32, 32})).sizes() == torch::IntArrayRef({4})));
  }

  TEST_CASE("the encoder is frozen") {
    StyleEncoder enc{StyleEncoderNet(small_config())};
    for (const auto& p : enc.net()->parameters()) CHECK_FALSE(p.requires_grad());
    const auto stack = enc.encode_style(torch::randn({2, 3, 32, 32}));
    CHECK_FALSE(stack.maps[0].requires_grad());
  }

  TEST_CASE("learns synthetic spoof styles") {
    SynthConfig sc;
    sc.identities = 12;
    sc.size = 32;
    sc.seed = 4;
    std::vector<torch::Tensor> imgs;
    std::vector<int64_t> styles;
    for (int64_t id = 0; id < sc.identities; ++id)
      for (int64_t s = 0; s < 3; ++s) {
        imgs.push_back(normalize_image(render_spoof(sc, id, s)));
        styles.push_back(s);
      }
    StyleTrainOptions opt;
    opt.steps = 80;
    opt.batch_size = 12;
    opt.seed = 2;
    const auto result = train_style_encoder(torch::stack(imgs), styles, small_config(), opt);
    CHECK(result.loss_curve.size() == 80);
    CHECK(result.loss_curve.back() < result.loss_curve.front());
    CHECK(result.train_accuracy >= 0.9);
  }

  TEST_CASE("training input validation") {
    const auto imgs = torch::zeros({4, 3, 32, 32});
    StyleTrainOptions opt;
    opt.steps = 1;
    CHECK_THROWS_AS(train_style_encoder(imgs, {1, 1, 1, 1}, small_config(), opt), std::invalid_argument);
    CHECK_THROWS_AS(train_style_encoder(imgs, {0, 1, 2}, small_config(), opt), std::invalid_argument);
    CHECK_THROWS_AS(train_style_encoder(imgs, {0, 1, 2, 7}, small_config(), opt), std::invalid_argument);
    auto bad = small_config();
    bad.condition_resolutions = {8, 16};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  }
}
