#include "doctest_torch.hpp"
#include "test_helpers.hpp"
#include "spoofsynth/common.hpp"
#include "spoofsynth/config.hpp"

#include <fstream>
#include <stdexcept>

using namespace spoofsynth;

TEST_SUITE("config") {
  TEST_CASE("defaults cover every schema key") {
    const RunConfig c;
    for (const auto& k : config_schema()) CHECK(c.get(k.name) == k.default_value);
    CHECK(c.get_int("schedule.steps") == 1000);
    CHECK((c.get_int_list("denoiser.channel_multipliers") == std::vector<int64_t>{1, 2, 2}));
    CHECK_FALSE(c.get_bool("loss.scale_non_target"));
    CHECK(c.get_double("loss.m") == 30.0);
  }

  TEST_CASE("parsing, comments and overrides") {
    const auto c = RunConfig::parse("# comment\nseed = 7   # trailing\n\nsampler.gamma=2.5\n");
    CHECK(c.get_int("seed") == 7);
    CHECK(c.get_double("sampler.gamma") == 2.5);
    CHECK(c.is_set("seed"));
    CHECK_FALSE(c.is_set("sampler.t_start"));
  }

  TEST_CASE("bad input is rejected with a location") {
    CHECK_THROWS_AS(RunConfig::parse("sampler.gama = 2"), std::invalid_argument);
    try {
      RunConfig::parse("seed = 1\nfoo.bar = 2", "run.cfg");
      FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::parse("seed"), std::invalid_argument);
    RunConfig c;
    CHECK_THROWS_AS(c.set("schedule.steps", "ten"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("stfm.zero_init", "yes"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("denoiser.channel_multipliers", "1,,2"), std::invalid_argument);
    CHECK(c.get_int("schedule.steps") == 1000);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.cfg"), DataError);
  }

  TEST_CASE("resolved text and hash") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    a.set("seed", "3");
    CHECK(a.hash() != b.hash());
    b.set("seed", "3");
    CHECK(a.resolved_text() == b.resolved_text());
    CHECK(a.resolved_text().find("seed = 3\n") != std::string::npos);
    CHECK(a.hash().size() == 16);
  }

  TEST_CASE("load from file") {
    const auto dir = testing::scratch_dir("config");
    std::ofstream(dir / "c.cfg") << "diffusion.steps = 12\n";
    CHECK(RunConfig::load(dir / "c.cfg").get_int("diffusion.steps") == 12);
  }

  TEST_CASE("component configs") {
    RunConfig c;
    c.set("seed", "5");
    const auto enc = encoder_config_from(c, 3);
    CHECK(enc.num_styles == 3);
    const auto den = denoiser_config_from(c, enc);
    CHECK(den.condition_channels == enc.condition_channels());
    CHECK(diffusion_options_from(c).seed == 5);
    CHECK(sampler_config_from(c).t_start == 100);
    CHECK(margin_params_from(c).s_live == 0.4);
    CHECK(schedule_from(c).steps() == 1000);
    const auto k = classifier_config_from(c);
    CHECK(k.optimizer == OptimizerKind::adam);
    CHECK(k.learning_rate == 1e-4);
    c.set("optimizer.name", "sgd");
    c.set("optimizer.learning_rate", "0.002");
    CHECK(classifier_config_from(c).optimizer == OptimizerKind::sgd);
    c.set("optimizer.name", "lbfgs");
    CHECK_THROWS_AS(classifier_config_from(c), std::invalid_argument);
    c.set("encoder.condition_resolutions", "16");
    CHECK_THROWS_AS(denoiser_config_from(c, encoder_config_from(c, 3)), std::invalid_argument);
  }
}
