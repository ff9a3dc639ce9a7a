#include "doctest_torch.hpp"
#include "test_helpers.hpp"
#include "spoofsynth/checkpoint.hpp"
#include "spoofsynth/common.hpp"

#include <fstream>

using namespace spoofsynth;

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip") {
    const auto dir = testing::scratch_dir("ckpt");
    Checkpoint c;
    c.kind = "test";
    c.meta = {{"seed", 4}, {"config_hash", "abc"}};
    c.tensors = {{"a", torch::randn({2, 3})}, {"b", torch::arange(5, torch::kFloat)}, {"s", torch::tensor(1.5f)}};
    save_checkpoint(dir / "c.ckpt", c);
    const auto back = load_checkpoint(dir / "c.ckpt");
    CHECK(back.kind == "test");
    CHECK(back.meta["seed"] == 4);
    REQUIRE(back.tensors.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.tensors[i].first == c.tensors[i].first);
      CHECK(torch::equal(back.tensors[i].second, c.tensors[i].second));
    }
    CHECK_THROWS_AS(back.tensor("zzz"), DataError);
  }

  TEST_CASE("damaged files") {
    const auto dir = testing::scratch_dir("ckpt_bad");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
    std::ofstream(dir / "junk.ckpt") << "hello\n";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
    Checkpoint c;
    c.kind = "t";
    c.tensors = {{"a", torch::ones({100})}};
    save_checkpoint(dir / "c.ckpt", c);
    std::filesystem::resize_file(dir / "c.ckpt", std::filesystem::file_size(dir / "c.ckpt") - 10);
    CHECK_THROWS_AS(load_checkpoint(dir / "c.ckpt"), DataError);
  }

  TEST_CASE("module state") {
    const auto dir = testing::scratch_dir("ckpt_module");
    torch::nn::Linear a(4, 3), b(4, 3);
    Checkpoint c;
    c.kind = "m";
    c.tensors = module_state(*a, "net.");
    save_checkpoint(dir / "m.ckpt", c);
    load_module_state(*b, load_checkpoint(dir / "m.ckpt"), "net.");
    CHECK(torch::equal(a->weight, b->weight));
    CHECK(torch::equal(a->bias, b->bias));
    torch::nn::Linear wrong(5, 3);
    CHECK_THROWS(load_module_state(*wrong, c, "net."));
    CHECK_THROWS(load_module_state(*b, c, "other."));
  }
}
