#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace spoofsynth {

enum class Label { live, spoof };

const char* to_string(Label label);

/// One manifest row. Live records carry style_id == kNoStyle.
struct SampleRecord {
  std::filesystem::path path;
  Label label = Label::live;
  int64_t style_id = -1;
  int64_t domain_id = 0;
  int64_t identity_id = 0;

  bool operator==(const SampleRecord&) const = default;
};

inline constexpr int64_t kNoStyle = -1;

/// JSON-lines manifest. Relative paths resolve against the manifest's
/// directory. Throws DataError naming the offending line.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& manifest, bool check_paths = true);

/// Writes paths relative to the manifest directory where possible.
void write_manifest(const std::filesystem::path& manifest, const std::vector<SampleRecord>& records);

struct LiveSpoofPair {
  SampleRecord live;
  SampleRecord spoof;
  SampleRecord guide;
};

struct PairingResult {
  std::vector<LiveSpoofPair> pairs;
  /// Identities with live images but no spoof image in the same domain.
  std::vector<int64_t> unpaired_identities;
};

/// One pair per spoof record that has a same-identity, same-domain live
/// record. The guide is drawn uniformly from spoofs of the same style.
/// Throws DataError when nothing can be paired.
PairingResult build_pairs(const std::vector<SampleRecord>& records, std::mt19937_64& rng);

/// Deterministic identity-level split: true for roughly `fraction` of all
/// identities, the same ones for equal seeds.
bool is_holdout_identity(int64_t identity, double fraction, std::uint64_t seed);

/// 8-bit RGB PNG <-> uint8 (3, H, W) tensor.
torch::Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const torch::Tensor& rgb8);

/// Loads the listed images as one (N, 3, H, W) float batch in [-1, 1].
torch::Tensor load_images(const std::vector<SampleRecord>& records);

struct SynthConfig {
  int64_t identities = 200;
  int64_t styles = 3;
  int64_t size = 64;
  std::uint64_t seed = 0;
  /// Domain d = identity % domains: 0 clean, 1 blurred, 2 sensor noise.
  int64_t domains = 3;
  /// Scales the whole presentation artefact (pattern and colour change)
  /// before capture blur and noise.
  double overlay_strength = 1.0;
  /// Scales the random phase of each spoof pattern. At 0 every spoof of a
  /// style carries its pattern at the same position.
  double pattern_jitter = 1.0;
};

void validate(const SynthConfig& config);

/// Spoof family of a style: 0 replay (moire), 1 print (halftone), 2 mask (specular).
int64_t style_family(int64_t style_id);

/// In-memory renderers, uint8 (3, size, size). Deterministic in (config, ids).
torch::Tensor render_live(const SynthConfig& config, int64_t identity);
torch::Tensor render_spoof(const SynthConfig& config, int64_t identity, int64_t style_id);

/// Renders every identity live and once per style as spoof, writes PNGs and
/// `manifest.jsonl` under out_dir, and returns the manifest path.
std::filesystem::path synth_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace spoofsynth
