#pragma once

#include "spoofsynth/classifier.hpp"
#include "spoofsynth/denoiser.hpp"
#include "spoofsynth/diffusion.hpp"
#include "spoofsynth/diffusion_trainer.hpp"
#include "spoofsynth/rq_loss.hpp"
#include "spoofsynth/sampler.hpp"
#include "spoofsynth/style_encoder.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace spoofsynth {

/// Plain-text run configuration: one `section.key = value` per line, `#`
/// starts a comment. Every key has a documented default; unknown keys are
/// rejected with std::invalid_argument.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(std::string_view text, const std::string& source = "<config>");
  /// Throws DataError when the file cannot be read.
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int64_t> get_int_list(const std::string& key) const;

  /// Every key with its effective value, sorted, one `key = value` per line.
  std::string resolved_text() const;
  /// Hex FNV-1a of resolved_text().
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* description;
};

/// The documented schema.
const std::vector<ConfigKey>& config_schema();

NoiseSchedule schedule_from(const RunConfig& config);
StyleEncoderConfig encoder_config_from(const RunConfig& config, int64_t num_styles);
StyleTrainOptions encoder_options_from(const RunConfig& config);
DenoiserConfig denoiser_config_from(const RunConfig& config, const StyleEncoderConfig& encoder);
DiffusionTrainOptions diffusion_options_from(const RunConfig& config);
SamplerConfig sampler_config_from(const RunConfig& config);
MarginParams margin_params_from(const RunConfig& config);
ClassifierConfig classifier_config_from(const RunConfig& config);

}  // namespace spoofsynth
