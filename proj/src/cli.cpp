#include "spoofsynth/cli.hpp"

#include "spoofsynth/checkpoint.hpp"
#include "spoofsynth/classifier.hpp"
#include "spoofsynth/common.hpp"
#include "spoofsynth/config.hpp"
#include "spoofsynth/denoiser.hpp"
#include "spoofsynth/diffusion_trainer.hpp"
#include "spoofsynth/metrics.hpp"
#include "spoofsynth/quality.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace spoofsynth {

namespace fs = std::filesystem;

LiveFilter LiveFilter::parse(const std::string& expr) {
  LiveFilter f;
  if (expr.empty() || expr == "all") return f;
  std::istringstream in(expr);
  std::string clause;
  while (std::getline(in, clause, ',')) {
    const auto op_pos = clause.find_first_of("=!<>");
    if (op_pos == std::string::npos || op_pos == 0) {
      throw std::invalid_argument("bad live filter clause '" + clause + "'");
    }
    Clause c;
    c.field = clause.substr(0, op_pos);
    std::size_t value_pos = op_pos + 1;
    if (value_pos < clause.size() && clause[value_pos] == '=') ++value_pos;
    c.op = clause.substr(op_pos, value_pos - op_pos);
    if (c.field != "identity_id" && c.field != "domain_id") {
      throw std::invalid_argument("live filter field must be identity_id or domain_id, got '" + c.field + "'");
    }
    static const std::set<std::string> ops{"=", "!=", "<", "<=", ">", ">="};
    if (!ops.count(c.op)) throw std::invalid_argument("bad live filter operator '" + c.op + "'");
    try {
      std::size_t used = 0;
      c.value = std::stoll(clause.substr(value_pos), &used);
      if (used != clause.size() - value_pos) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad live filter value in '" + clause + "'");
    }
    f.clauses_.push_back(c);
  }
  return f;
}

bool LiveFilter::matches(const SampleRecord& r) const {
  if (r.label != Label::live) return false;
  for (const auto& c : clauses_) {
    const int64_t v = c.field == "identity_id" ? r.identity_id : r.domain_id;
    const bool ok = c.op == "=" ? v == c.value
                    : c.op == "!=" ? v != c.value
                    : c.op == "<"  ? v < c.value
                    : c.op == "<=" ? v <= c.value
                    : c.op == ">"  ? v > c.value
                                   : v >= c.value;
    if (!ok) return false;
  }
  return true;
}

std::vector<GenerationItem> plan_generation(const std::vector<SampleRecord>& records, const LiveFilter& filter,
                                            int64_t guide_style, std::uint64_t seed) {
  std::vector<const SampleRecord*> guides;
  for (const auto& r : records) {
    if (r.label == Label::spoof && r.style_id == guide_style) guides.push_back(&r);
  }
  if (guides.empty()) throw DataError("no spoof image of style " + std::to_string(guide_style) + " to guide with");
  std::vector<GenerationItem> items;
  for (const auto& r : records) {
    if (!filter.matches(r)) continue;
    const auto index = static_cast<std::uint64_t>(items.size());
    std::mt19937_64 rng(derive_seed(seed ^ 0x6775696465ULL, index));
    std::uniform_int_distribution<std::size_t> pick(0, guides.size() - 1);
    items.push_back({index, r, *guides[pick(rng)]});
  }
  if (items.empty()) throw DataError("the live filter selects no live images");
  return items;
}

torch::Tensor run_generation(const std::vector<GenerationItem>& items, const SamplerConfig& config,
                             const NoiseSchedule& schedule, NoisePredictor& denoiser, const StyleEncoder& encoder,
                             int64_t batch_size) {
  require(batch_size >= 1, "generation batch size must be positive");
  std::vector<torch::Tensor> outputs;
  for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(items.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<SampleRecord> live, guide;
    for (auto i = start; i < end; ++i) {
      live.push_back(items[i].live);
      guide.push_back(items[i].guide);
    }
    outputs.push_back(edit_sample(load_images(live), load_images(guide), config, schedule, denoiser, encoder,
                                  items[start].index));
  }
  return torch::cat(outputs);
}

namespace {

void log(const std::string& message) { std::fprintf(stderr, "[spoofsynth] %s\n", message.c_str()); }

void log_config(const RunConfig& config) {
  log("resolved config (hash " + config.hash() + "):");
  std::fputs(config.resolved_text().c_str(), stderr);
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig() : RunConfig::load(path); }

std::vector<SampleRecord> filter_label(const std::vector<SampleRecord>& records, Label label) {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.label == label) out.push_back(r);
  }
  return out;
}

int64_t style_count(const std::vector<SampleRecord>& records) {
  int64_t max_style = -1;
  for (const auto& r : records) {
    if (r.label == Label::spoof) max_style = std::max(max_style, r.style_id);
  }
  if (max_style < 0) throw DataError("the manifest contains no spoof images");
  return max_style + 1;
}

nlohmann::json base_meta(const RunConfig& config) {
  nlohmann::json meta;
  meta["config"] = config.resolved_text();
  meta["config_hash"] = config.hash();
  meta["seed"] = config.get_int("seed");
  return meta;
}

RunConfig config_of(const Checkpoint& ckpt) {
  return RunConfig::parse(ckpt.meta.at("config").get<std::string>(), "checkpoint config");
}

Checkpoint load_kind(const std::string& path, const std::string& kind) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.kind != kind) throw DataError(path + " holds a " + ckpt.kind + " checkpoint, expected " + kind);
  return ckpt;
}

StyleEncoder encoder_from(const Checkpoint& ckpt, const std::string& prefix) {
  const auto config = config_of(ckpt);
  const auto styles = ckpt.meta.at("num_styles").get<int64_t>();
  StyleEncoderNet net(encoder_config_from(config, styles));
  load_module_state(*net, ckpt, prefix);
  return StyleEncoder(net);
}

// Commands.

struct SynthArgs {
  std::string out;
  int64_t identities = 200, styles = 3, size = 64, domains = 3;
  std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a) {
  SynthConfig c;
  c.identities = a.identities;
  c.styles = a.styles;
  c.size = a.size;
  c.domains = a.domains;
  c.seed = a.seed;
  const auto manifest = synth_corpus(c, a.out);
  std::printf("%s\n", manifest.string().c_str());
}

struct ScoreArgs {
  std::string manifest, scorer = "proxy", out;
};

void cmd_score(const ScoreArgs& a) {
  const auto records = load_manifest(a.manifest);
  const auto scorer = make_scorer(a.scorer);
  QualityCache cache;
  cache.scorer = scorer->name();
  for (const auto& r : records) cache.scores[QualityCache::key(r.path)] = score_image(read_png(r.path), *scorer);
  write_quality_cache(a.out, cache);
  log("scored " + std::to_string(records.size()) + " images with " + scorer->name());
}

struct TrainEncoderArgs {
  std::string manifest, config, out;
};

void cmd_train_encoder(const TrainEncoderArgs& a) {
  const auto config = load_config(a.config);
  log_config(config);
  const auto records = load_manifest(a.manifest);
  const auto spoofs = filter_label(records, Label::spoof);
  const int64_t styles = style_count(records);
  std::vector<int64_t> labels;
  for (const auto& r : spoofs) labels.push_back(r.style_id);

  auto options = encoder_options_from(config);
  options.on_log = [](int64_t step, double loss) { log("encoder step " + std::to_string(step) + " loss " + std::to_string(loss)); };
  auto result = train_style_encoder(load_images(spoofs), labels, encoder_config_from(config, styles), options);
  log("encoder training accuracy " + std::to_string(result.train_accuracy));

  Checkpoint ckpt;
  ckpt.kind = "style-encoder";
  ckpt.meta = base_meta(config);
  ckpt.meta["num_styles"] = styles;
  ckpt.meta["train_accuracy"] = result.train_accuracy;
  ckpt.tensors = module_state(*result.encoder.net());
  save_checkpoint(a.out, ckpt);
}

struct TrainDiffusionArgs {
  std::string manifest, encoder, config, out;
};

void cmd_train_diffusion(const TrainDiffusionArgs& a) {
  const auto config = load_config(a.config);
  log_config(config);
  const auto enc_ckpt = load_kind(a.encoder, "style-encoder");
  const auto encoder = encoder_from(enc_ckpt, "");
  const auto records = load_manifest(a.manifest);

  std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(config.get_int("seed")), 5));
  const auto pairing = build_pairs(records, rng);
  if (!pairing.unpaired_identities.empty()) {
    log(std::to_string(pairing.unpaired_identities.size()) + " identities have no spoof counterpart and are not paired");
  }
  std::vector<SampleRecord> live, spoof;
  PairedData data;
  for (const auto& p : pairing.pairs) {
    live.push_back(p.live);
    spoof.push_back(p.spoof);
    data.style.push_back(p.spoof.style_id);
  }
  data.live = load_images(live);
  data.spoof = load_images(spoof);
  const auto guides = filter_label(records, Label::spoof);
  data.guides = load_images(guides);
  for (const auto& g : guides) data.guide_style.push_back(g.style_id);

  DenoiserNet net(denoiser_config_from(config, encoder.config()));
  auto options = diffusion_options_from(config);
  options.on_log = [](int64_t step, double loss) { log("diffusion step " + std::to_string(step) + " loss " + std::to_string(loss)); };
  train_denoiser(net, encoder, data, schedule_from(config), options);

  Checkpoint ckpt;
  ckpt.kind = "diffusion";
  ckpt.meta = base_meta(config);
  ckpt.meta["num_styles"] = encoder.config().num_styles;
  ckpt.meta["encoder_config"] = enc_ckpt.meta.at("config");
  ckpt.meta["pairs"] = pairing.pairs.size();
  ckpt.tensors = module_state(*net, "denoiser.");
  for (auto& t : module_state(*encoder.net(), "encoder.")) ckpt.tensors.push_back(std::move(t));
  save_checkpoint(a.out, ckpt);
}

struct GenerateArgs {
  std::string manifest, live_filter = "all", ckpt, out;
  int64_t guide_style = 0;
  std::optional<int64_t> t_start;
  std::optional<double> gamma;
  std::optional<std::uint64_t> seed;
  int64_t batch = 8;
};

void cmd_generate(const GenerateArgs& a) {
  const auto ckpt = load_kind(a.ckpt, "diffusion");
  const auto config = config_of(ckpt);
  Checkpoint enc_view;
  enc_view.meta = nlohmann::json{{"config", ckpt.meta.at("encoder_config")}, {"num_styles", ckpt.meta.at("num_styles")}};
  enc_view.tensors = ckpt.tensors;
  const auto encoder = encoder_from(enc_view, "encoder.");
  DenoiserNet net(denoiser_config_from(config, encoder.config()));
  load_module_state(*net, ckpt, "denoiser.");
  net->eval();

  auto sampler = sampler_config_from(config);
  if (a.t_start) sampler.t_start = *a.t_start;
  if (a.gamma) sampler.gamma = *a.gamma;
  if (a.seed) sampler.seed = *a.seed;
  const auto schedule = schedule_from(config);
  validate(sampler, schedule);
  if (a.guide_style < 0 || a.guide_style >= encoder.config().num_styles) {
    throw std::invalid_argument("guide style " + std::to_string(a.guide_style) + " is unknown to the checkpoint");
  }

  const auto records = load_manifest(a.manifest);
  const auto items = plan_generation(records, LiveFilter::parse(a.live_filter), a.guide_style, sampler.seed);
  const auto images = run_generation(items, sampler, schedule, *net, encoder, a.batch);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw DataError("cannot create " + a.out + ": " + ec.message());
  std::ofstream logf(fs::path(a.out) / "generation_log.jsonl", std::ios::trunc);
  if (!logf) throw DataError("cannot write the generation log in " + a.out);
  nlohmann::ordered_json header;
  header["kind"] = "generation";
  header["seed"] = sampler.seed;
  header["config_hash"] = ckpt.meta.at("config_hash");
  header["t_start"] = sampler.t_start;
  header["gamma"] = sampler.gamma;
  header["guide_style"] = a.guide_style;
  header["count"] = items.size();
  logf << header.dump() << '\n';

  std::vector<SampleRecord> generated;
  char name[64];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    std::snprintf(name, sizeof(name), "gen_%05llu.png", static_cast<unsigned long long>(item.index));
    const fs::path path = fs::path(a.out) / name;
    write_png(path, denormalize_image(images[static_cast<int64_t>(i)]));
    nlohmann::ordered_json line;
    line["index"] = item.index;
    line["output"] = name;
    line["live"] = item.live.path.generic_string();
    line["guide"] = item.guide.path.generic_string();
    line["style_id"] = a.guide_style;
    line["identity_id"] = item.live.identity_id;
    line["domain_id"] = item.live.domain_id;
    logf << line.dump() << '\n';
    generated.push_back({path, Label::spoof, a.guide_style, item.live.domain_id, item.live.identity_id});
  }
  write_manifest(fs::path(a.out) / "manifest.jsonl", generated);
  log("generated " + std::to_string(items.size()) + " images in " + a.out);
}

struct TrainClassifierArgs {
  std::string manifest, quality, config, out;
  std::optional<double> s_live, s_spoof, m;
};

std::string number_text(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

ClassifierData classifier_data(const std::vector<SampleRecord>& records, const ClassLayout& layout,
                               const QualityCache* quality) {
  ClassifierData d;
  d.images = load_images(records);
  for (const auto& r : records) {
    d.classes.push_back(layout.class_of(r));
    d.is_live.push_back(r.label == Label::live ? 1 : 0);
    if (quality) d.b_aq.push_back(quality->at(r.path));
  }
  return d;
}

std::vector<SampleRecord> split(const std::vector<SampleRecord>& records, const RunConfig& config, bool holdout) {
  const double fraction = config.get_double("classifier.holdout_fraction");
  const auto seed = static_cast<std::uint64_t>(config.get_int("seed"));
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (is_holdout_identity(r.identity_id, fraction, seed) == holdout) out.push_back(r);
  }
  return out;
}

void cmd_train_classifier(const TrainClassifierArgs& a) {
  auto config = load_config(a.config);
  if (a.s_live) config.set("loss.s_live", number_text(*a.s_live));
  if (a.s_spoof) config.set("loss.s_spoof", number_text(*a.s_spoof));
  if (a.m) config.set("loss.m", number_text(*a.m));
  log_config(config);
  const auto params = margin_params_from(config);
  const auto classifier = classifier_config_from(config);

  const auto records = load_manifest(a.manifest);
  const auto quality = load_quality_cache(a.quality);
  const auto layout = layout_for(records, config.get_bool("classifier.live_per_domain"));
  const auto train = split(records, config, false);
  if (train.empty()) throw DataError("the holdout split leaves no training identities");
  const auto data = classifier_data(train, layout, &quality);

  auto result = train_classifier(data, layout, params, classifier, [](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %lld loss %.5f b_rq mean %.4f std %.4f min %.4f max %.4f",
                  static_cast<long long>(e.epoch), e.mean_loss, e.b_rq_mean, e.b_rq_std, e.b_rq_min, e.b_rq_max);
    log(buf);
  });

  Checkpoint ckpt;
  ckpt.kind = "classifier";
  ckpt.meta = base_meta(config);
  ckpt.meta["layout"] = {{"domains", layout.domains}, {"styles", layout.styles}, {"live_per_domain", layout.live_per_domain}};
  ckpt.meta["quality_scorer"] = quality.scorer;
  ckpt.tensors = module_state(*result.model.net);
  save_checkpoint(a.out, ckpt);
}

struct EvaluateArgs {
  std::string ckpt, manifest, threshold = "fixed:0.5", report, scores, dev_scores, dev_manifest, split = "heldout",
                                                                                                  scores_out;
};

struct ScoredSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> is_live;
};

ScoredSet read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("score file not found: " + path);
  ScoredSet s;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      const auto label = j.at("label").get<std::string>();
      if (label != "live" && label != "spoof") throw DataError("unknown label '" + label + "'");
      s.scores.push_back(j.at("score").get<double>());
      s.is_live.push_back(label == "live" ? 1 : 0);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return s;
}

ClassifierModel classifier_from(const Checkpoint& ckpt, RunConfig& config) {
  config = config_of(ckpt);
  ClassLayout layout;
  const auto& l = ckpt.meta.at("layout");
  layout.domains = l.at("domains").get<int64_t>();
  layout.styles = l.at("styles").get<int64_t>();
  layout.live_per_domain = l.at("live_per_domain").get<bool>();
  ClassifierNet net(classifier_config_from(config), layout.num_classes());
  load_module_state(*net, ckpt);
  net->eval();
  return ClassifierModel{net, layout, margin_params_from(config)};
}

ScoredSet score_records(const ClassifierModel& model, const std::vector<SampleRecord>& records) {
  ScoredSet s;
  if (records.empty()) return s;
  s.scores = liveness_scores(model, load_images(records));
  for (const auto& r : records) s.is_live.push_back(r.label == Label::live ? 1 : 0);
  return s;
}

void cmd_evaluate(const EvaluateArgs& a) {
  ScoredSet eval, dev;
  bool have_dev = false;
  RunConfig config;
  if (!a.scores.empty()) {
    eval = read_scores(a.scores);
    if (!a.dev_scores.empty()) {
      dev = read_scores(a.dev_scores);
      have_dev = true;
    }
  } else {
    if (a.ckpt.empty() || a.manifest.empty()) throw std::invalid_argument("evaluate needs --scores or both --ckpt and --manifest");
    const auto ckpt = load_kind(a.ckpt, "classifier");
    const auto model = classifier_from(ckpt, config);
    const auto records = load_manifest(a.manifest);
    if (a.split == "heldout") {
      eval = score_records(model, split(records, config, true));
    } else if (a.split == "all") {
      eval = score_records(model, records);
    } else {
      throw std::invalid_argument("--split must be heldout or all");
    }
    if (!a.dev_manifest.empty()) {
      dev = score_records(model, load_manifest(a.dev_manifest));
      have_dev = true;
    } else if (!a.dev_scores.empty()) {
      dev = read_scores(a.dev_scores);
      have_dev = true;
    } else {
      dev = score_records(model, split(records, config, false));
      have_dev = true;
    }
    if (!a.scores_out.empty()) {
      std::ofstream out(a.scores_out, std::ios::trunc);
      if (!out) throw DataError("cannot write " + a.scores_out);
      for (std::size_t i = 0; i < eval.scores.size(); ++i) {
        nlohmann::ordered_json j{{"score", eval.scores[i]}, {"label", eval.is_live[i] ? "live" : "spoof"}};
        out << j.dump() << '\n';
      }
    }
  }
  if (eval.scores.empty()) throw DataError("nothing to evaluate");

  ThresholdPolicy policy;
  const auto colon = a.threshold.find(':');
  const std::string kind = a.threshold.substr(0, colon);
  double value = 0.0;
  if (kind != "eer") {
    if (colon == std::string::npos) throw std::invalid_argument("--threshold expects fixed:T, bpcer-dev:X or eer");
    try {
      std::size_t used = 0;
      value = std::stod(a.threshold.substr(colon + 1), &used);
      if (used != a.threshold.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad threshold value in '" + a.threshold + "'");
    }
  }
  if (kind == "fixed") {
    policy = FixedThreshold{value};
  } else if (kind == "bpcer-dev") {
    if (!have_dev) throw std::invalid_argument("bpcer-dev needs development scores (--dev-scores or a checkpoint)");
    policy = BpcerOnDev{value, dev.scores, dev.is_live};
  } else if (kind == "eer") {
    policy = EqualErrorRate{};
  } else {
    throw std::invalid_argument("--threshold expects fixed:T, bpcer-dev:X or eer");
  }

  const auto report = evaluate(eval.scores, eval.is_live, policy);
  std::fputs(format_report(report).c_str(), stdout);
  if (!a.report.empty()) {
    nlohmann::ordered_json j;
    j["hter"] = report.hter;
    j["auc"] = report.auc;
    j["acer"] = report.acer;
    j["apcer"] = report.apcer;
    j["bpcer"] = report.bpcer;
    j["far"] = report.far;
    j["frr"] = report.frr;
    j["threshold"] = report.threshold;
    j["counts"] = {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}};
    j["samples"] = eval.scores.size();
    j["threshold_policy"] = a.threshold;
    j["seed"] = config.get_int("seed");
    j["config_hash"] = config.hash();
    std::ofstream out(a.report, std::ios::trunc);
    if (!out) throw DataError("cannot write report " + a.report);
    out << j.dump(2) << '\n';
  }
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Spoof face synthesis and quality-aware anti-spoofing training", "spoofsynth"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "render the procedural face corpus");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--identities", synth.identities, "number of identities");
  s->add_option("--styles", synth.styles, "number of spoof styles");
  s->add_option("--size", synth.size, "image side in pixels");
  s->add_option("--domains", synth.domains, "number of capture domains");
  s->add_option("--seed", synth.seed, "seed");
  s->callback([&] { cmd_synth(synth); });

  ScoreArgs score;
  auto* q = app.add_subcommand("score-quality", "score image quality for every manifest entry");
  q->add_option("--manifest", score.manifest)->required();
  q->add_option("--scorer", score.scorer, "proxy or affine:<path>");
  q->add_option("--out", score.out, "quality cache (JSON)")->required();
  q->callback([&] { cmd_score(score); });

  TrainEncoderArgs enc;
  auto* e = app.add_subcommand("train-style-encoder", "train the spoofing-style encoder");
  e->add_option("--manifest", enc.manifest)->required();
  e->add_option("--config", enc.config);
  e->add_option("--out", enc.out)->required();
  e->callback([&] { cmd_train_encoder(enc); });

  TrainDiffusionArgs diff;
  auto* d = app.add_subcommand("train-diffusion", "train the conditional denoiser on live-spoof pairs");
  d->add_option("--manifest", diff.manifest)->required();
  d->add_option("--encoder", diff.encoder)->required();
  d->add_option("--config", diff.config);
  d->add_option("--out", diff.out)->required();
  d->callback([&] { cmd_train_diffusion(diff); });

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "edit live images into spoofs of a guide style");
  g->add_option("--manifest", gen.manifest)->required();
  g->add_option("--live-filter", gen.live_filter, "e.g. domain_id=1,identity_id<50");
  g->add_option("--guide-style", gen.guide_style)->required();
  g->add_option("--t-start", gen.t_start);
  g->add_option("--gamma", gen.gamma);
  g->add_option("--seed", gen.seed);
  g->add_option("--batch", gen.batch);
  g->add_option("--ckpt", gen.ckpt)->required();
  g->add_option("--out", gen.out)->required();
  g->callback([&] { cmd_generate(gen); });

  TrainClassifierArgs cls;
  auto* c = app.add_subcommand("train-classifier", "train the live/spoof classifier with the relative quality loss");
  c->add_option("--manifest", cls.manifest)->required();
  c->add_option("--quality", cls.quality)->required();
  c->add_option("--s-live", cls.s_live);
  c->add_option("--s-spoof", cls.s_spoof);
  c->add_option("--m", cls.m);
  c->add_option("--config", cls.config);
  c->add_option("--out", cls.out)->required();
  c->callback([&] { cmd_train_classifier(cls); });

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "compute HTER, AUC, ACER, APCER and BPCER");
  v->add_option("--ckpt", ev.ckpt);
  v->add_option("--manifest", ev.manifest);
  v->add_option("--split", ev.split, "heldout or all");
  v->add_option("--threshold", ev.threshold, "fixed:T, bpcer-dev:X or eer");
  v->add_option("--report", ev.report, "JSON report path");
  v->add_option("--scores", ev.scores, "JSON-lines {score, label} instead of a checkpoint");
  v->add_option("--dev-scores", ev.dev_scores);
  v->add_option("--dev-manifest", ev.dev_manifest);
  v->add_option("--scores-out", ev.scores_out, "write per-sample scores");
  v->callback([&] { cmd_evaluate(ev); });

  auto* k = app.add_subcommand("config", "print every configuration key with its default");
  k->callback([] {
    for (const auto& key : config_schema()) std::printf("%s = %s  # %s\n", key.name, key.default_value, key.description);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::fprintf(stderr, "spoofsynth: usage error: %s\n", one_line(err.what()).c_str());
    return 1;
  } catch (const DataError& err) {
    std::fprintf(stderr, "spoofsynth: data error: %s\n", one_line(err.what()).c_str());
    return 2;
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "spoofsynth: usage error: %s\n", one_line(err.what()).c_str());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "spoofsynth: error: %s\n", one_line(err.what()).c_str());
    return 3;
  }
  return 0;
}

}  // namespace spoofsynth
