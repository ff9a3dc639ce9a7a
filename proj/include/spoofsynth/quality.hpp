#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spoofsynth {

/// Row-major single-channel image, intensities on the 0..255 scale.
struct GrayImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> pixels;

  double& at(int64_t y, int64_t x) { return pixels[static_cast<std::size_t>(y * width + x)]; }
  double at(int64_t y, int64_t x) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

GrayImage make_gray(int64_t height, int64_t width, double fill = 0.0);

/// uint8 (3, H, W) RGB -> luma (0.299 R + 0.587 G + 0.114 B).
GrayImage to_gray(const torch::Tensor& rgb8);

/// Mean subtracted contrast normalised coefficients (I - mu) / (sigma + 1),
/// local moments from a 7x7 Gaussian window (sigma 7/6, replicate border).
GrayImage mscn(const GrayImage& image);

/// Asymmetric generalised Gaussian fit by moment matching.
struct AggdFit {
  double shape = 2.0;        // alpha
  double left_sigma = 0.0;
  double right_sigma = 0.0;
  double mean = 0.0;         // eta, the mean of the fitted distribution
};

/// Moment-matching AGGD fit; shape is searched on [0.2, 10) in 0.001 steps.
/// Samples without both signs fall back to shape 2 and zero scales.
AggdFit fit_aggd(std::span<const double> samples);

inline constexpr std::size_t kBrisqueFeatureCount = 36;
using BrisqueFeatures = std::array<double, kBrisqueFeatureCount>;

/// Per scale (full, then half resolution): MSCN [shape, (l^2 + r^2)/2], then
/// for horizontal, vertical and both diagonal neighbour products
/// [shape, mean, l^2, r^2].
BrisqueFeatures brisque_features(const torch::Tensor& rgb8);
BrisqueFeatures brisque_features(const GrayImage& gray);

/// Feature vector of a featureless image: every fit at its fallback.
BrisqueFeatures fallback_brisque_features();

/// Maps BRISQUE features to a quality score; lower means higher quality.
class QualityScorer {
 public:
  virtual ~QualityScorer() = default;
  virtual double score(const BrisqueFeatures& features) const = 0;
  virtual std::string name() const = 0;
};

/// score = bias + sum_i weights[i] * features[i].
class AffineScorer final : public QualityScorer {
 public:
  AffineScorer(std::string name, double bias, std::array<double, kBrisqueFeatureCount> weights);
  double score(const BrisqueFeatures& features) const override;
  std::string name() const override { return name_; }
  double bias() const { return bias_; }
  const std::array<double, kBrisqueFeatureCount>& weights() const { return weights_; }

 private:
  std::string name_;
  double bias_;
  std::array<double, kBrisqueFeatureCount> weights_;
};

/// Built-in proxy calibrated on graded blur and noise: an affine map of the
/// half-scale MSCN shape that rises with both distortions.
AffineScorer proxy_scorer();

/// JSON {"bias": b, "weights": [36 numbers]}. Throws DataError naming the
/// path when the file is missing or malformed.
AffineScorer load_affine_scorer(const std::filesystem::path& path);

/// "proxy" or "affine:<path>".
std::unique_ptr<QualityScorer> make_scorer(const std::string& spec);

double score_image(const torch::Tensor& rgb8, const QualityScorer& scorer);

/// Absolute quality per image, keyed by normalised absolute path.
struct QualityCache {
  std::string scorer;
  std::map<std::string, double> scores;

  static std::string key(const std::filesystem::path& image);
  /// Throws DataError when the image has no score.
  double at(const std::filesystem::path& image) const;
};

void write_quality_cache(const std::filesystem::path& path, const QualityCache& cache);
QualityCache load_quality_cache(const std::filesystem::path& path);

/// Batch-relative quality of absolute scores.
struct QualityBatch {
  std::vector<double> b_aq;
  double b_mean = 0.0;
  double b_std = 0.0;   // population
  int64_t n1 = 0;       // strictly below the mean
  int64_t n2 = 0;       // strictly above the mean
  std::vector<double> b_norm;
  std::vector<double> b_rq;
};

inline constexpr double kRelativeQualityEps = 1e-9;

/// b_norm = (mean - b) / (std + eps); b_rq = clip(b_norm / 3, -n1/N, n2/N).
QualityBatch relative_quality(std::span<const double> b_aq, double eps = kRelativeQualityEps);

}  // namespace spoofsynth
