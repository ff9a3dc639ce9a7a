#include "doctest_torch.hpp"
#include "test_helpers.hpp"
#include "spoofsynth/common.hpp"
#include "spoofsynth/data.hpp"
#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/quality.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

using namespace spoofsynth;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string error_of(const fs::path& manifest) {
  try {
    load_manifest(manifest, false);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

SampleRecord rec(const std::string& path, Label label, int64_t style, int64_t domain, int64_t id) {
  return {path, label, style, domain, id};
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("empty manifest") {
    const auto dir = testing::scratch_dir("empty_manifest");
    write_text(dir / "m.jsonl", "");
    CHECK(load_manifest(dir / "m.jsonl").empty());
  }

  TEST_CASE("manifest diagnostics name the line") {
    const auto dir = testing::scratch_dir("bad_manifest");
    const std::string ok = R"({"path":"a.png","label":"live","domain_id":0,"identity_id":1})" "\n";
    write_text(dir / "m.jsonl", ok + R"({"path":"b.png","label":"spoof","domain_id":0,"identity_id":1})" "\n");
    CHECK(error_of(dir / "m.jsonl").find(":2:") != std::string::npos);
    write_text(dir / "m.jsonl", ok + "{not json\n");
    CHECK(error_of(dir / "m.jsonl").find(":2:") != std::string::npos);
    write_text(dir / "m.jsonl", R"({"path":"a.png","label":"real","domain_id":0,"identity_id":1})" "\n");
    CHECK(error_of(dir / "m.jsonl").find(":1:") != std::string::npos);
    write_text(dir / "m.jsonl", R"({"path":"a.png","label":"live","identity_id":1})" "\n");
    CHECK(error_of(dir / "m.jsonl").find("domain_id") != std::string::npos);
    write_text(dir / "m.jsonl", ok + ok);
    CHECK(error_of(dir / "m.jsonl").find(":2:") != std::string::npos);
    CHECK_THROWS_AS(load_manifest(dir / "m.jsonl.missing"), DataError);
    write_text(dir / "m.jsonl", ok);
    CHECK_THROWS_AS(load_manifest(dir / "m.jsonl", true), DataError);  // a.png does not exist
  }

  TEST_CASE("manifest round trip") {
    const auto dir = testing::scratch_dir("roundtrip");
    std::vector<SampleRecord> records{rec("", Label::live, kNoStyle, 2, 7), rec("", Label::spoof, 4, 2, 7)};
    records[0].path = dir / "live" / "x.png";
    records[1].path = dir / "spoof" / "y.png";
    write_manifest(dir / "m.jsonl", records);
    CHECK((load_manifest(dir / "m.jsonl", false) == records));
  }

  TEST_CASE("pairing") {
    std::vector<SampleRecord> one{rec("l0", Label::live, kNoStyle, 0, 0), rec("s0", Label::spoof, 0, 0, 0)};
    std::mt19937_64 rng(1);
    const auto single = build_pairs(one, rng);
    REQUIRE(single.pairs.size() == 1);
    CHECK(single.pairs[0].guide == one[1]);

    std::vector<SampleRecord> corpus;
    for (int64_t id = 0; id < 10; ++id) {
      corpus.push_back(rec("l" + std::to_string(id), Label::live, kNoStyle, id % 2, id));
      for (int64_t s = 0; s < 3; ++s) {
        corpus.push_back(rec("s" + std::to_string(id) + "_" + std::to_string(s), Label::spoof, s, id % 2, id));
      }
    }
    corpus.push_back(rec("orphan", Label::live, kNoStyle, 0, 99));
    corpus.push_back(rec("wrong_domain", Label::spoof, 1, 1, 98));
    corpus.push_back(rec("l98", Label::live, kNoStyle, 0, 98));
    std::mt19937_64 a(5), b(5);
    const auto pa = build_pairs(corpus, a);
    const auto pb = build_pairs(corpus, b);
    CHECK(pa.pairs.size() == 30);
    for (std::size_t i = 0; i < pa.pairs.size(); ++i) {
      const auto& p = pa.pairs[i];
      CHECK(p.live.identity_id == p.spoof.identity_id);
      CHECK(p.live.domain_id == p.spoof.domain_id);
      CHECK(p.guide.style_id == p.spoof.style_id);
      CHECK(p.guide.label == Label::spoof);
      CHECK(p.guide == pb.pairs[i].guide);
    }
    CHECK((std::set<int64_t>(pa.unpaired_identities.begin(), pa.unpaired_identities.end()) == std::set<int64_t>{98, 99}));
    std::vector<SampleRecord> lonely{rec("l", Label::live, kNoStyle, 0, 0)};
    CHECK_THROWS_AS(build_pairs(lonely, a), DataError);
  }

  TEST_CASE("holdout split is deterministic and proportional") {
    int held = 0;
    for (int64_t id = 0; id < 2000; ++id) {
      const bool h = is_holdout_identity(id, 0.3, 42);
      CHECK(h == is_holdout_identity(id, 0.3, 42));
      held += h ? 1 : 0;
    }
    CHECK(held > 520);
    CHECK(held < 680);
    CHECK_FALSE(is_holdout_identity(3, 0.0, 1));
    CHECK(is_holdout_identity(3, 1.0, 1));
  }

  TEST_CASE("png round trip") {
    const auto dir = testing::scratch_dir("png");
    const auto img = torch::randint(0, 256, {3, 20, 12}, torch::kInt).to(torch::kUInt8);
    write_png(dir / "a.png", img);
    CHECK(torch::equal(read_png(dir / "a.png"), img));
    CHECK_THROWS_AS(read_png(dir / "none.png"), DataError);
  }

  TEST_CASE("synthetic corpus counts and determinism") {
    SynthConfig c;
    c.identities = 2;
    c.styles = 1;
    c.size = 64;
    c.seed = 3;
    const auto d1 = testing::scratch_dir("synth1"), d2 = testing::scratch_dir("synth2");
    const auto m1 = synth_corpus(c, d1), m2 = synth_corpus(c, d2);
    const auto r1 = load_manifest(m1), r2 = load_manifest(m2);
    CHECK(r1.size() == 4);
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(torch::equal(read_png(r1[i].path), read_png(r2[i].path)));
    c.seed = 4;
    CHECK_FALSE(torch::equal(render_live(c, 0), [&] {
      auto o = c;
      o.seed = 3;
      return render_live(o, 0);
    }()));
  }

  TEST_CASE("identities and styles differ visibly") {
    SynthConfig c;
    const auto a = render_live(c, 0).to(torch::kFloat), b = render_live(c, 1).to(torch::kFloat);
    CHECK((a - b).abs().mean().item<double>() > 5.0);
    const auto s0 = render_spoof(c, 0, 0).to(torch::kFloat), s1 = render_spoof(c, 0, 1).to(torch::kFloat);
    CHECK((s0 - s1).abs().mean().item<double>() > 2.0);
    CHECK((s0 - a).abs().mean().item<double>() > 2.0);
    CHECK(style_family(4) == 1);
  }

  TEST_CASE("overlay strength blends the artefact into the bare face") {
    // identity 0 sits in the clean domain, so capture adds nothing
    SynthConfig c;
    const auto live = render_live(c, 0).to(torch::kFloat);
    const auto full = render_spoof(c, 0, 1).to(torch::kFloat);
    c.overlay_strength = 0.0;
    CHECK(torch::equal(render_spoof(c, 0, 1).to(torch::kFloat), live));
    c.overlay_strength = 0.5;
    const auto half = render_spoof(c, 0, 1).to(torch::kFloat);
    CHECK((half - (live + full) / 2).abs().mean().item<double>() < 0.6);
    CHECK((half - live).abs().mean().item<double>() > 1.0);
  }

  TEST_CASE("without jitter every spoof of a style shares its pattern phase") {
    // print also desaturates, which ties part of its residual to the face colours
    const auto residual_corr = [](const SynthConfig& c, int64_t style) {
      const auto r0 = (render_spoof(c, 0, style).to(torch::kFloat) - render_live(c, 0).to(torch::kFloat)).flatten();
      const auto r3 = (render_spoof(c, 3, style).to(torch::kFloat) - render_live(c, 3).to(torch::kFloat)).flatten();
      const auto a = r0 - r0.mean(), b = r3 - r3.mean();
      return ((a * b).sum() / (a.norm() * b.norm())).item<double>();
    };
    SynthConfig c;
    c.pattern_jitter = 0.0;
    for (int64_t style : {0, 1, 2}) {
      CAPTURE(style);
      const double fixed = residual_corr(c, style);
      auto j = c;
      j.pattern_jitter = 1.0;
      CHECK(fixed > 0.5);
      CHECK(fixed > residual_corr(j, style) + 0.4);
    }
  }

  TEST_CASE("quality spreads across the corpus") {
    SynthConfig c;
    c.identities = 12;
    const auto scorer = proxy_scorer();
    std::vector<double> q;
    for (int64_t id = 0; id < c.identities; ++id) q.push_back(score_image(render_live(c, id), scorer));
    double mean = 0.0, var = 0.0;
    for (double v : q) mean += v / q.size();
    for (double v : q) var += (v - mean) * (v - mean) / q.size();
    CHECK(std::sqrt(var) > 0.5);
  }

  TEST_CASE("config validation") {
    SynthConfig c;
    c.size = 16;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
    c.size = 64;
    c.identities = 0;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
    c.identities = 2;
    c.overlay_strength = -0.1;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
    c.overlay_strength = 1.0;
    c.pattern_jitter = 1.5;
    CHECK_THROWS_AS(validate(c), std::invalid_argument);
  }
}
