#include "doctest_torch.hpp"
#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

TEST_SUITE("oracles") {
  TEST_CASE("patch stats of the 2x2 worked map") {
    const oracle::Map map{1, 2, 2, {1.0, 3.0, 5.0, 7.0}};
    CHECK(oracle::patch_stats(map, 2, 0).front()[0] == doctest::Approx(4.0));
    CHECK(oracle::patch_stats(map, 2, 1).front()[0] == doctest::Approx(5.0));
    CHECK(oracle::patch_stats(map, 2, 0).size() == 2);  // one patch plus the global token
  }

  TEST_CASE("auc of the 4-score worked example") {
    CHECK((oracle::pairwise_auc({0.9, 0.4, 0.1, 0.6}, {1, 1, 0, 0}) == 0.75));
  }

  TEST_CASE("finite differences of the margin function") {
    const double s = 0.4, b = 0.25;
    auto g = [&](const std::vector<double>& x) { return std::cos(x[0] - s * b) - s * (1.0 + b); };
    const double theta = M_PI / 3.0;
    CHECK((std::abs(oracle::fd_gradient(g, {theta})[0] + std::sin(theta - 0.1)) < 1e-6));
  }

  TEST_CASE("size guards") {
    oracle::Map big{1, 64, 64, std::vector<double>(64 * 64, 0.0)};
    CHECK_THROWS_AS(oracle::patch_stats(big, 8, 0), std::invalid_argument);
    std::vector<double> scores(101, 0.0);
    std::vector<int> live(101, 1);
    CHECK_THROWS_AS(oracle::pairwise_auc(scores, live), std::invalid_argument);
  }

  TEST_CASE("sweep on a separable set reaches zero error") {
    const auto r = oracle::hter_sweep({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(r.hter == 0.0);
    CHECK(r.threshold == 0.2);
  }

  TEST_CASE("relative quality and alpha bar by hand") {
    const auto q = oracle::relative_quality({10, 20, 30, 40});
    CHECK(q[0] == doctest::Approx(15.0 / std::sqrt(125.0) / 3.0));
    CHECK(oracle::alpha_bar(2, 3, 0.1, 0.3) == doctest::Approx(0.9 * 0.8));
  }
}
