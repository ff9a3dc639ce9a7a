#include "spoofsynth/config.hpp"

#include "spoofsynth/common.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace spoofsynth {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"seed", "0", "master seed; every stage derives its streams from it"},
      {"data.image_size", "64", "square image side in pixels"},
      {"schedule.steps", "1000", "diffusion steps T"},
      {"schedule.beta_start", "0.0001", "first beta of the linear schedule"},
      {"schedule.beta_end", "0.02", "last beta of the linear schedule"},
      {"denoiser.base_channels", "32", "width of the first U-Net level"},
      {"denoiser.channel_multipliers", "1,2,2", "per-level width multipliers"},
      {"denoiser.res_blocks", "2", "residual blocks per level"},
      {"denoiser.time_embed_dim", "128", "timestep embedding width"},
      {"denoiser.groups", "8", "GroupNorm groups"},
      {"denoiser.stfm_max_resolution", "32", "STFM follows every block at or below this side"},
      {"stfm.heads", "1", "attention heads per STFM"},
      {"stfm.zero_init", "true", "zero-initialise the STFM output convolution"},
      {"encoder.stem_channels", "16", "style encoder stem width"},
      {"encoder.stage_channels", "32,64,64", "style encoder stage widths"},
      {"encoder.condition_resolutions", "32,16", "stage sides exported as conditions"},
      {"encoder.steps", "300", "style encoder optimisation steps"},
      {"encoder.batch_size", "32", "style encoder batch size"},
      {"encoder.learning_rate", "0.001", "style encoder Adam learning rate"},
      {"diffusion.steps", "2000", "denoiser optimisation steps"},
      {"diffusion.batch_size", "16", "denoiser batch size"},
      {"diffusion.learning_rate", "0.0005", "denoiser Adam learning rate"},
      {"diffusion.ema_decay", "0.995", "weight EMA decay, 0 disables"},
      {"diffusion.grad_clip", "1.0", "gradient norm clip, 0 disables"},
      {"sampler.gamma", "2.0", "guidance strength"},
      {"sampler.t_start", "100", "edit depth"},
      {"sampler.p_uncond", "0.1", "training-time condition dropout"},
      {"loss.s_live", "0.4", "margin scale of live samples"},
      {"loss.s_spoof", "0.2", "margin scale of spoof samples"},
      {"loss.m", "30.0", "logit scale"},
      {"loss.scale_non_target", "false", "also scale non-target logits by m"},
      {"classifier.channels", "16,32,64", "classifier stage widths"},
      {"classifier.embed_dim", "64", "embedding width"},
      {"classifier.groups", "8", "GroupNorm groups"},
      {"classifier.live_per_domain", "true", "one live class per domain instead of a single one"},
      {"classifier.holdout_fraction", "0.3", "fraction of identities held out from training"},
      {"classifier.epochs", "20", "training epochs"},
      {"classifier.batch_size", "32", "training batch size"},
      {"optimizer.name", "adam", "classifier optimiser: adam or sgd"},
      {"optimizer.learning_rate", "0.0001", "classifier learning rate"},
      {"optimizer.momentum", "0.9", "SGD momentum"},
      {"optimizer.weight_decay", "0.0005", "weight decay"},
  };
  return schema;
}

namespace {

const ConfigKey* find_key(const std::string& key) {
  const auto& schema = config_schema();
  const auto it = std::find_if(schema.begin(), schema.end(), [&](const ConfigKey& k) { return key == k.name; });
  return it == schema.end() ? nullptr : &*it;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      config.set(key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config not found: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  if (value.empty()) throw std::invalid_argument("config key '" + key + "' has an empty value");
  RunConfig probe;
  probe.values_[key] = value;
  // Parse eagerly so that malformed values fail where they are set.
  const std::string def = find_key(key)->default_value;
  if (def == "true" || def == "false") {
    probe.get_bool(key);
  } else if (def.find(',') != std::string::npos) {
    probe.get_int_list(key);
  } else if (def.find_first_not_of("0123456789") == std::string::npos) {
    probe.get_int(key);
  } else if (def.find_first_not_of("0123456789.e-") == std::string::npos) {
    probe.get_double(key);
  }
  values_[key] = value;
}

std::string RunConfig::get(const std::string& key) const {
  const auto* k = find_key(key);
  if (!k) throw std::invalid_argument("unknown config key '" + key + "'");
  const auto it = values_.find(key);
  return it == values_.end() ? k->default_value : it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  const auto text = get(key);
  int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const auto text = get(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("config key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto text = get(key);
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("config key '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<int64_t> RunConfig::get_int_list(const std::string& key) const {
  const auto text = get(key);
  std::vector<int64_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
      throw std::invalid_argument("config key '" + key + "' expects a comma-separated integer list, got '" + text + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::vector<std::string> keys;
  for (const auto& k : config_schema()) keys.emplace_back(k.name);
  std::sort(keys.begin(), keys.end());
  std::string out;
  for (const auto& k : keys) out += k + " = " + get(k) + "\n";
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(resolved_text())); }

NoiseSchedule schedule_from(const RunConfig& c) {
  return build_schedule(c.get_int("schedule.steps"), c.get_double("schedule.beta_start"),
                        c.get_double("schedule.beta_end"));
}

StyleEncoderConfig encoder_config_from(const RunConfig& c, int64_t num_styles) {
  StyleEncoderConfig e;
  e.image_size = c.get_int("data.image_size");
  e.num_styles = num_styles;
  e.stem_channels = c.get_int("encoder.stem_channels");
  e.stage_channels = c.get_int_list("encoder.stage_channels");
  e.condition_resolutions = c.get_int_list("encoder.condition_resolutions");
  validate(e);
  return e;
}

StyleTrainOptions encoder_options_from(const RunConfig& c) {
  StyleTrainOptions o;
  o.steps = c.get_int("encoder.steps");
  o.batch_size = c.get_int("encoder.batch_size");
  o.learning_rate = c.get_double("encoder.learning_rate");
  o.seed = static_cast<std::uint64_t>(c.get_int("seed"));
  return o;
}

DenoiserConfig denoiser_config_from(const RunConfig& c, const StyleEncoderConfig& encoder) {
  DenoiserConfig d;
  d.image_size = c.get_int("data.image_size");
  d.base_channels = c.get_int("denoiser.base_channels");
  d.channel_multipliers = c.get_int_list("denoiser.channel_multipliers");
  d.res_blocks = c.get_int("denoiser.res_blocks");
  d.time_embed_dim = c.get_int("denoiser.time_embed_dim");
  d.groups = c.get_int("denoiser.groups");
  d.stfm_max_resolution = c.get_int("denoiser.stfm_max_resolution");
  d.stfm_heads = c.get_int("stfm.heads");
  d.stfm_zero_init = c.get_bool("stfm.zero_init");
  // Condition maps come from the encoder stages at the STFM resolutions.
  const auto resolutions = d.stfm_resolutions();
  const auto channels = encoder.condition_channels();
  if (resolutions != encoder.condition_resolutions) {
    throw std::invalid_argument("encoder.condition_resolutions must equal the denoiser STFM resolutions");
  }
  d.condition_channels = channels;
  validate(d);
  return d;
}

DiffusionTrainOptions diffusion_options_from(const RunConfig& c) {
  DiffusionTrainOptions o;
  o.steps = c.get_int("diffusion.steps");
  o.batch_size = c.get_int("diffusion.batch_size");
  o.learning_rate = c.get_double("diffusion.learning_rate");
  o.ema_decay = c.get_double("diffusion.ema_decay");
  o.grad_clip = c.get_double("diffusion.grad_clip");
  o.p_uncond = c.get_double("sampler.p_uncond");
  o.seed = static_cast<std::uint64_t>(c.get_int("seed"));
  validate(o);
  return o;
}

SamplerConfig sampler_config_from(const RunConfig& c) {
  SamplerConfig s;
  s.gamma = c.get_double("sampler.gamma");
  s.t_start = c.get_int("sampler.t_start");
  s.p_uncond = c.get_double("sampler.p_uncond");
  s.seed = static_cast<std::uint64_t>(c.get_int("seed"));
  return s;
}

MarginParams margin_params_from(const RunConfig& c) {
  MarginParams p;
  p.s_live = c.get_double("loss.s_live");
  p.s_spoof = c.get_double("loss.s_spoof");
  p.m = c.get_double("loss.m");
  p.scale_non_target = c.get_bool("loss.scale_non_target");
  validate(p);
  return p;
}

ClassifierConfig classifier_config_from(const RunConfig& c) {
  ClassifierConfig k;
  k.image_size = c.get_int("data.image_size");
  k.channels = c.get_int_list("classifier.channels");
  k.embed_dim = c.get_int("classifier.embed_dim");
  k.groups = c.get_int("classifier.groups");
  k.epochs = c.get_int("classifier.epochs");
  k.batch_size = c.get_int("classifier.batch_size");
  const auto name = c.get("optimizer.name");
  if (name == "adam") {
    k.optimizer = OptimizerKind::adam;
  } else if (name == "sgd") {
    k.optimizer = OptimizerKind::sgd;
  } else {
    throw std::invalid_argument("optimizer.name must be adam or sgd, got '" + name + "'");
  }
  k.learning_rate = c.get_double("optimizer.learning_rate");
  k.momentum = c.get_double("optimizer.momentum");
  k.weight_decay = c.get_double("optimizer.weight_decay");
  k.seed = static_cast<std::uint64_t>(c.get_int("seed"));
  validate(k);
  return k;
}

}  // namespace spoofsynth
