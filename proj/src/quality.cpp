#include "spoofsynth/quality.hpp"

#include "spoofsynth/common.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace spoofsynth {

GrayImage make_gray(int64_t height, int64_t width, double fill) {
  return GrayImage{height, width, std::vector<double>(static_cast<std::size_t>(height * width), fill)};
}

GrayImage to_gray(const torch::Tensor& rgb8) {
  require(rgb8.dim() == 3 && rgb8.size(0) == 3 && rgb8.scalar_type() == torch::kUInt8,
          "expected a uint8 (3, H, W) image");
  const auto img = rgb8.contiguous();
  const int64_t h = img.size(1), w = img.size(2);
  const auto* p = img.data_ptr<std::uint8_t>();
  GrayImage out = make_gray(h, w);
  const int64_t plane = h * w;
  for (int64_t i = 0; i < plane; ++i) {
    out.pixels[static_cast<std::size_t>(i)] = 0.299 * p[i] + 0.587 * p[plane + i] + 0.114 * p[2 * plane + i];
  }
  return out;
}

namespace {

std::array<double, 7> gaussian_kernel() {
  std::array<double, 7> k{};
  const double sigma = 7.0 / 6.0;
  double sum = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double d = i - 3;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

GrayImage gaussian_blur7(const GrayImage& in) {
  static const auto kernel = gaussian_kernel();
  const int64_t h = in.height, w = in.width;
  GrayImage tmp = make_gray(h, w), out = make_gray(h, w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k) acc += kernel[static_cast<std::size_t>(k + 3)] * in.at(y, std::clamp<int64_t>(x + k, 0, w - 1));
      tmp.at(y, x) = acc;
    }
  }
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k) acc += kernel[static_cast<std::size_t>(k + 3)] * tmp.at(std::clamp<int64_t>(y + k, 0, h - 1), x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

GrayImage half_scale(const GrayImage& in) {
  const int64_t h = in.height / 2, w = in.width / 2;
  GrayImage out = make_gray(h, w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      out.at(y, x) = 0.25 * (in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) + in.at(2 * y + 1, 2 * x) +
                             in.at(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

double gamma_ratio(double a) {
  return std::tgamma(2.0 / a) * std::tgamma(2.0 / a) / (std::tgamma(1.0 / a) * std::tgamma(3.0 / a));
}

struct ShapeTable {
  std::vector<double> shape;
  std::vector<double> ratio;
};

const ShapeTable& shape_table() {
  static const ShapeTable table = [] {
    ShapeTable t;
    for (int i = 0; i < 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      t.shape.push_back(a);
      t.ratio.push_back(gamma_ratio(a));
    }
    return t;
  }();
  return table;
}

}  // namespace

GrayImage mscn(const GrayImage& image) {
  require(image.height >= 16 && image.width >= 16, "MSCN needs an image of at least 16x16");
  const GrayImage mu = gaussian_blur7(image);
  GrayImage sq = image;
  for (auto& v : sq.pixels) v *= v;
  const GrayImage mu_sq = gaussian_blur7(sq);
  GrayImage out = make_gray(image.height, image.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double var = std::max(0.0, mu_sq.pixels[i] - mu.pixels[i] * mu.pixels[i]);
    out.pixels[i] = (image.pixels[i] - mu.pixels[i]) / (std::sqrt(var) + 1.0);
  }
  return out;
}

AggdFit fit_aggd(std::span<const double> samples) {
  std::size_t pos = 0, neg = 0;
  double pos_sq = 0.0, neg_sq = 0.0, abs_sum = 0.0;
  for (double v : samples) {
    if (v > 0) {
      ++pos;
      pos_sq += v * v;
      abs_sum += v;
    } else if (v < 0) {
      ++neg;
      neg_sq += v * v;
      abs_sum -= v;
    }
  }
  if (pos == 0 || neg == 0) return AggdFit{};

  AggdFit fit;
  fit.left_sigma = std::sqrt(neg_sq / static_cast<double>(neg));
  fit.right_sigma = std::sqrt(pos_sq / static_cast<double>(pos));
  const double n = static_cast<double>(samples.size());
  const double g = fit.left_sigma / fit.right_sigma;
  const double r_hat = (abs_sum / n) * (abs_sum / n) / ((neg_sq + pos_sq) / n);
  const double r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));

  const auto& table = shape_table();
  std::size_t best = 0;
  double best_diff = std::abs(table.ratio[0] - r_norm);
  for (std::size_t i = 1; i < table.ratio.size(); ++i) {
    const double diff = std::abs(table.ratio[i] - r_norm);
    if (diff < best_diff) {
      best_diff = diff;
      best = i;
    }
  }
  fit.shape = table.shape[best];
  const double a = fit.shape;
  fit.mean = (fit.right_sigma - fit.left_sigma) * (std::tgamma(2.0 / a) / std::tgamma(1.0 / a)) *
             std::sqrt(std::tgamma(1.0 / a) / std::tgamma(3.0 / a));
  return fit;
}

namespace {

void append_scale(const GrayImage& image, BrisqueFeatures& out, std::size_t offset) {
  const GrayImage coeffs = mscn(image);
  const AggdFit base = fit_aggd(coeffs.pixels);
  out[offset + 0] = base.shape;
  out[offset + 1] = (base.left_sigma * base.left_sigma + base.right_sigma * base.right_sigma) / 2.0;

  constexpr int shifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  std::vector<double> products;
  for (int s = 0; s < 4; ++s) {
    const int dy = shifts[s][0], dx = shifts[s][1];
    products.clear();
    for (int64_t y = 0; y + dy < coeffs.height; ++y) {
      for (int64_t x = std::max(0, -dx); x < coeffs.width && x + dx < coeffs.width; ++x) {
        products.push_back(coeffs.at(y, x) * coeffs.at(y + dy, x + dx));
      }
    }
    const AggdFit fit = fit_aggd(products);
    const std::size_t o = offset + 2 + static_cast<std::size_t>(s) * 4;
    out[o + 0] = fit.shape;
    out[o + 1] = fit.mean;
    out[o + 2] = fit.left_sigma * fit.left_sigma;
    out[o + 3] = fit.right_sigma * fit.right_sigma;
  }
}

}  // namespace

BrisqueFeatures brisque_features(const GrayImage& gray) {
  require(gray.height >= 32 && gray.width >= 32, "BRISQUE features need an image of at least 32x32");
  BrisqueFeatures out{};
  append_scale(gray, out, 0);
  append_scale(half_scale(gray), out, 18);
  return out;
}

BrisqueFeatures brisque_features(const torch::Tensor& rgb8) { return brisque_features(to_gray(rgb8)); }

BrisqueFeatures fallback_brisque_features() {
  BrisqueFeatures out{};
  for (std::size_t scale = 0; scale < 2; ++scale) {
    const std::size_t o = scale * 18;
    out[o] = 2.0;
    for (std::size_t s = 0; s < 4; ++s) out[o + 2 + s * 4] = 2.0;
  }
  return out;
}

AffineScorer::AffineScorer(std::string name, double bias, std::array<double, kBrisqueFeatureCount> weights)
    : name_(std::move(name)), bias_(bias), weights_(weights) {}

double AffineScorer::score(const BrisqueFeatures& features) const {
  double s = bias_;
  for (std::size_t i = 0; i < kBrisqueFeatureCount; ++i) s += weights_[i] * features[i];
  return s;
}

AffineScorer proxy_scorer() {
  // Half-scale MSCN shape: heavy-tailed (about 0.9) for clean renders, rising
  // towards 2 under blur and towards Gaussian under sensor noise.
  std::array<double, kBrisqueFeatureCount> w{};
  w[18] = 30.0;
  return AffineScorer("proxy", 10.0, w);
}

AffineScorer load_affine_scorer(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("quality model not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != kBrisqueFeatureCount) {
      throw DataError("quality model " + path.string() + " must list 36 weights");
    }
    std::array<double, kBrisqueFeatureCount> w{};
    std::copy(weights.begin(), weights.end(), w.begin());
    return AffineScorer("affine:" + path.string(), j.at("bias").get<double>(), w);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("quality model " + path.string() + " is malformed: " + e.what());
  }
}

std::unique_ptr<QualityScorer> make_scorer(const std::string& spec) {
  if (spec == "proxy") return std::make_unique<AffineScorer>(proxy_scorer());
  if (spec.rfind("affine:", 0) == 0) return std::make_unique<AffineScorer>(load_affine_scorer(spec.substr(7)));
  throw std::invalid_argument("unknown quality scorer '" + spec + "' (expected proxy or affine:<path>)");
}

double score_image(const torch::Tensor& rgb8, const QualityScorer& scorer) {
  return scorer.score(brisque_features(rgb8));
}

std::string QualityCache::key(const std::filesystem::path& image) {
  return std::filesystem::absolute(image).lexically_normal().generic_string();
}

double QualityCache::at(const std::filesystem::path& image) const {
  const auto it = scores.find(key(image));
  if (it == scores.end()) throw DataError("missing quality score for " + image.string());
  return it->second;
}

void write_quality_cache(const std::filesystem::path& path, const QualityCache& cache) {
  nlohmann::ordered_json j;
  j["scorer"] = cache.scorer;
  j["scores"] = cache.scores;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write quality cache " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError("failed writing quality cache " + path.string());
}

QualityCache load_quality_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("quality cache not found: " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    QualityCache cache;
    cache.scorer = j.at("scorer").get<std::string>();
    cache.scores = j.at("scores").get<std::map<std::string, double>>();
    return cache;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("quality cache " + path.string() + " is malformed: " + e.what());
  }
}

QualityBatch relative_quality(std::span<const double> b_aq, double eps) {
  require(!b_aq.empty(), "relative quality needs a non-empty batch");
  require(eps > 0.0, "relative quality eps must be positive");
  QualityBatch q;
  q.b_aq.assign(b_aq.begin(), b_aq.end());
  const double n = static_cast<double>(b_aq.size());

  // Shifted accumulation keeps the mean exact for constant batches.
  const double pivot = b_aq.front();
  double shifted = 0.0;
  for (double b : b_aq) shifted += b - pivot;
  q.b_mean = pivot + shifted / n;
  double ss = 0.0;
  for (double b : b_aq) ss += (b - q.b_mean) * (b - q.b_mean);
  q.b_std = std::sqrt(ss / n);

  for (double b : b_aq) {
    if (b < q.b_mean) ++q.n1;
    if (b > q.b_mean) ++q.n2;
  }
  const double lo = -static_cast<double>(q.n1) / n;
  const double hi = static_cast<double>(q.n2) / n;
  q.b_norm.reserve(b_aq.size());
  q.b_rq.reserve(b_aq.size());
  for (double b : b_aq) {
    const double norm = (q.b_mean - b) / (q.b_std + eps);
    q.b_norm.push_back(norm);
    q.b_rq.push_back(std::clamp(norm / 3.0, lo, hi));
  }
  return q;
}

}  // namespace spoofsynth
