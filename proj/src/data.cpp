#include "spoofsynth/data.hpp"

#include "spoofsynth/common.hpp"
#include "spoofsynth/diffusion.hpp"

#include "json.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace spoofsynth {

namespace fs = std::filesystem;

const char* to_string(Label label) { return label == Label::live ? "live" : "spoof"; }

namespace {

[[noreturn]] void line_error(const fs::path& manifest, std::size_t line, const std::string& what) {
  throw DataError(manifest.string() + ":" + std::to_string(line) + ": " + what);
}

int64_t int_field(const nlohmann::json& j, const char* key, const fs::path& manifest, std::size_t line) {
  if (!j.contains(key)) line_error(manifest, line, std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) line_error(manifest, line, std::string("field '") + key + "' must be an integer");
  return v.get<int64_t>();
}

}  // namespace

std::vector<SampleRecord> load_manifest(const fs::path& manifest, bool check_paths) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  const fs::path base = manifest.parent_path();

  std::vector<SampleRecord> records;
  std::set<fs::path> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      line_error(manifest, line, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) line_error(manifest, line, "record must be a JSON object");

    SampleRecord r;
    if (!j.contains("path") || !j.at("path").is_string()) line_error(manifest, line, "missing field 'path'");
    fs::path p = j.at("path").get<std::string>();
    r.path = (p.is_absolute() ? p : base / p).lexically_normal();

    if (!j.contains("label") || !j.at("label").is_string()) line_error(manifest, line, "missing field 'label'");
    const auto label = j.at("label").get<std::string>();
    if (label == "live") {
      r.label = Label::live;
    } else if (label == "spoof") {
      r.label = Label::spoof;
    } else {
      line_error(manifest, line, "unknown label '" + label + "'");
    }

    r.domain_id = int_field(j, "domain_id", manifest, line);
    r.identity_id = int_field(j, "identity_id", manifest, line);
    if (r.label == Label::spoof) {
      r.style_id = int_field(j, "style_id", manifest, line);
      if (r.style_id < 0) line_error(manifest, line, "spoof style_id must be non-negative");
    } else if (j.contains("style_id") && !j.at("style_id").is_null()) {
      const int64_t s = int_field(j, "style_id", manifest, line);
      if (s != kNoStyle) line_error(manifest, line, "live records must have style_id -1 or none");
    }

    if (!seen.insert(r.path).second) line_error(manifest, line, "duplicate path " + r.path.string());
    if (check_paths && !fs::exists(r.path)) line_error(manifest, line, "image not found: " + r.path.string());
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& manifest, const std::vector<SampleRecord>& records) {
  const fs::path base = manifest.parent_path();
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + manifest.string());
  for (const auto& r : records) {
    fs::path p = fs::absolute(r.path).lexically_normal();
    const auto rel = p.lexically_relative(fs::absolute(base).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    nlohmann::ordered_json j;
    j["path"] = p.generic_string();
    j["label"] = to_string(r.label);
    j["style_id"] = r.label == Label::live ? kNoStyle : r.style_id;
    j["domain_id"] = r.domain_id;
    j["identity_id"] = r.identity_id;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + manifest.string());
}

PairingResult build_pairs(const std::vector<SampleRecord>& records, std::mt19937_64& rng) {
  std::map<std::pair<int64_t, int64_t>, const SampleRecord*> live_by_key;
  std::map<int64_t, std::vector<const SampleRecord*>> spoof_by_style;
  std::set<std::pair<int64_t, int64_t>> spoof_keys;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.identity_id, r.domain_id);
    if (r.label == Label::live) {
      live_by_key.try_emplace(key, &r);
    } else {
      spoof_by_style[r.style_id].push_back(&r);
      spoof_keys.insert(key);
    }
  }

  PairingResult result;
  for (const auto& r : records) {
    if (r.label != Label::spoof) continue;
    const auto it = live_by_key.find({r.identity_id, r.domain_id});
    if (it == live_by_key.end()) continue;
    const auto& candidates = spoof_by_style.at(r.style_id);
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    result.pairs.push_back(LiveSpoofPair{*it->second, r, *candidates[pick(rng)]});
  }

  std::set<int64_t> unpaired;
  for (const auto& [key, rec] : live_by_key) {
    if (!spoof_keys.count(key)) unpaired.insert(key.first);
  }
  result.unpaired_identities.assign(unpaired.begin(), unpaired.end());
  if (result.pairs.empty()) throw DataError("no live-spoof pairs: no spoof image has a same-identity, same-domain live image");
  return result;
}

bool is_holdout_identity(int64_t identity, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, "holdout fraction must lie in [0, 1]");
  const std::uint64_t h = derive_seed(seed ^ 0x686f6c646f7574ULL, static_cast<std::uint64_t>(identity));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

torch::Tensor read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int64_t h = image.height, w = image.width;
  return torch::from_blob(buffer.data(), {h, w, 3}, torch::kUInt8).permute({2, 0, 1}).contiguous();
}

void write_png(const fs::path& path, const torch::Tensor& rgb8) {
  require(rgb8.dim() == 3 && rgb8.size(0) == 3 && rgb8.scalar_type() == torch::kUInt8,
          "write_png expects a uint8 (3, H, W) tensor");
  const auto hwc = rgb8.permute({1, 2, 0}).contiguous();
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(rgb8.size(2));
  image.height = static_cast<png_uint_32>(rgb8.size(1));
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, hwc.data_ptr<std::uint8_t>(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

torch::Tensor load_images(const std::vector<SampleRecord>& records) {
  std::vector<torch::Tensor> images;
  images.reserve(records.size());
  for (const auto& r : records) {
    auto img = read_png(r.path);
    if (!images.empty() && img.sizes() != images.front().sizes()) {
      throw DataError("image " + r.path.string() + " differs in size from the first image");
    }
    images.push_back(std::move(img));
  }
  if (images.empty()) return torch::empty({0, 3, 0, 0});
  return normalize_image(torch::stack(images));
}

// Procedural corpus.

void validate(const SynthConfig& c) {
  require(c.identities >= 1, "identities must be >= 1");
  require(c.styles >= 1, "styles must be >= 1");
  require(c.size >= 32 && c.size <= 1024, "size must lie in [32, 1024]");
  require(c.domains >= 1, "domains must be >= 1");
  require(c.overlay_strength >= 0.0, "overlay strength must be non-negative");
  require(c.pattern_jitter >= 0.0 && c.pattern_jitter <= 1.0, "pattern jitter must lie in [0, 1]");
}

int64_t style_family(int64_t style_id) { return style_id % 3; }

namespace {

constexpr double kPi = std::numbers::pi;

struct Canvas {
  int64_t size;
  std::vector<double> px;  // (H, W, 3) in [0, 1]

  explicit Canvas(int64_t s) : size(s), px(static_cast<std::size_t>(s * s * 3), 0.0) {}
  double& at(int64_t y, int64_t x, int c) { return px[static_cast<std::size_t>((y * size + x) * 3 + c)]; }
  double at(int64_t y, int64_t x, int c) const { return px[static_cast<std::size_t>((y * size + x) * 3 + c)]; }
};

using Rgb = std::array<double, 3>;

struct FaceParams {
  Rgb bg0, bg1, skin, hair, iris, lips;
  double bg_angle, light_angle;
  double cx, cy, a, b;
  double blur_sigma, noise_sigma;
};

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double operator()(double lo, double hi) { return lo + (hi - lo) * unit_(rng_); }
  double normal() { return normal_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Rgb random_color(Uniform& u, double lo, double hi) {
  Rgb c{};
  for (auto& v : c) v = u(lo, hi);
  return c;
}

FaceParams face_params(const SynthConfig& config, int64_t identity) {
  Uniform u(derive_seed(config.seed, static_cast<std::uint64_t>(identity)));
  FaceParams f;
  f.bg0 = random_color(u, 0.05, 0.95);
  f.bg1 = random_color(u, 0.05, 0.95);
  f.bg_angle = u(0.0, 2.0 * kPi);
  const double tone = u(0.35, 0.9);
  f.skin = {tone * u(0.95, 1.1), tone * u(0.75, 0.9), tone * u(0.6, 0.8)};
  f.hair = random_color(u, 0.02, 0.45);
  f.iris = random_color(u, 0.05, 0.4);
  f.lips = {u(0.45, 0.75), u(0.15, 0.35), u(0.15, 0.35)};
  f.light_angle = u(0.0, 2.0 * kPi);
  f.cx = u(0.42, 0.58);
  f.cy = u(0.47, 0.58);
  f.a = u(0.22, 0.32);
  f.b = u(0.30, 0.40);
  const double level = u(0.0, 1.0);
  const int64_t kind = (identity % config.domains) % 3;
  f.blur_sigma = kind == 1 ? 0.6 + 0.6 * level : 0.0;
  f.noise_sigma = kind == 2 ? 0.02 + 0.03 * level : 0.0;
  return f;
}

double ellipse_mask(double u, double v, double cx, double cy, double a, double b, double edge) {
  const double du = (u - cx) / a, dv = (v - cy) / b;
  const double r = std::sqrt(du * du + dv * dv);
  return std::clamp((1.0 - r) / edge + 0.5, 0.0, 1.0);
}

void blend(Canvas& c, int64_t y, int64_t x, const Rgb& color, double alpha) {
  for (int k = 0; k < 3; ++k) c.at(y, x, k) = c.at(y, x, k) * (1.0 - alpha) + color[static_cast<std::size_t>(k)] * alpha;
}

Canvas draw_face(const FaceParams& f, int64_t size) {
  Canvas c(size);
  const double s = static_cast<double>(size);
  const double edge = 1.5 / (s * std::min(f.a, f.b));
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      const double u = (x + 0.5) / s, v = (y + 0.5) / s;
      const double t =
          std::clamp(0.5 + (u - 0.5) * std::cos(f.bg_angle) + (v - 0.5) * std::sin(f.bg_angle), 0.0, 1.0);
      for (int k = 0; k < 3; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        c.at(y, x, k) = f.bg0[kk] * (1.0 - t) + f.bg1[kk] * t;
      }
      blend(c, y, x, f.hair, ellipse_mask(u, v, f.cx, f.cy - 0.04, f.a * 1.15, f.b * 1.08, edge));

      const double face = ellipse_mask(u, v, f.cx, f.cy, f.a, f.b, edge);
      const double light = 0.85 + 0.15 * ((u - f.cx) * std::cos(f.light_angle) + (v - f.cy) * std::sin(f.light_angle)) / f.a;
      Rgb skin{};
      for (std::size_t k = 0; k < 3; ++k) skin[k] = std::clamp(f.skin[k] * light, 0.0, 1.0);
      blend(c, y, x, skin, face);
      const double fringe = face * std::clamp((f.cy - 0.6 * f.b - v) * s / 2.0, 0.0, 1.0);
      blend(c, y, x, f.hair, fringe);

      const Rgb white{0.92, 0.92, 0.9};
      for (double side : {-1.0, 1.0}) {
        const double ex = f.cx + side * 0.38 * f.a, ey = f.cy - 0.12 * f.b;
        blend(c, y, x, white, ellipse_mask(u, v, ex, ey, 0.17 * f.a, 0.09 * f.b, 2.0 * edge));
        blend(c, y, x, f.iris, ellipse_mask(u, v, ex, ey, 0.08 * f.a, 0.08 * f.b, 2.0 * edge));
      }
      const Rgb shade{skin[0] * 0.8, skin[1] * 0.8, skin[2] * 0.8};
      blend(c, y, x, shade, 0.5 * ellipse_mask(u, v, f.cx, f.cy + 0.12 * f.b, 0.08 * f.a, 0.2 * f.b, 2.0 * edge));
      blend(c, y, x, f.lips, ellipse_mask(u, v, f.cx, f.cy + 0.52 * f.b, 0.35 * f.a, 0.08 * f.b, 2.0 * edge));
    }
  }
  return c;
}

void apply_overlay(Canvas& c, int64_t style_id, double jitter, Uniform& u) {
  const int64_t variant = style_id / 3;
  const double amp = 0.12;
  const int64_t size = c.size;
  switch (style_family(style_id)) {
    case 0: {  // replay: two slightly detuned gratings beating into moire, bluish screen cast
      const double freq = 0.16 + 0.03 * static_cast<double>(variant % 3);
      const double angle = (20.0 + 35.0 * static_cast<double>(variant)) * kPi / 180.0;
      const double phase0 = jitter * u(0.0, 2.0 * kPi), phase1 = jitter * u(0.0, 2.0 * kPi);
      const Rgb gain{0.8, 1.0, 1.2}, tint{0.97, 1.0, 1.06};
      for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
          const double p0 = freq * (x * std::cos(angle) + y * std::sin(angle));
          const double p1 = 1.07 * freq * (x * std::cos(angle + 0.12) + y * std::sin(angle + 0.12));
          const double wave = 0.7 * std::sin(2.0 * kPi * p0 + phase0) + 0.5 * std::sin(2.0 * kPi * p1 + phase1);
          for (int k = 0; k < 3; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            c.at(y, x, k) = 0.04 + 0.92 * c.at(y, x, k) * tint[kk] + amp * gain[kk] * wave;
          }
        }
      }
      break;
    }
    case 1: {  // print: halftone dot lattice on desaturated, warm paper
      const double period = 4.0 + static_cast<double>(variant);
      const double ox = jitter * u(0.0, period), oy = jitter * u(0.0, period);
      const Rgb tint{1.03, 1.0, 0.9};
      for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
          const double dots = std::cos(2.0 * kPi * (x + ox) / period) * std::cos(2.0 * kPi * (y + oy) / period);
          const double gray = (c.at(y, x, 0) + c.at(y, x, 1) + c.at(y, x, 2)) / 3.0;
          for (int k = 0; k < 3; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            c.at(y, x, k) = (0.65 * c.at(y, x, k) + 0.35 * gray) * tint[kk] + amp * dots;
          }
        }
      }
      break;
    }
    default: {  // mask: specular highlights on a regular lattice over a waxy surface
      const double period = 9.0 + 2.0 * static_cast<double>(variant);
      const double ox = jitter * u(0.0, period), oy = jitter * u(0.0, period);
      const double sigma = 1.6;
      for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
          const double dx = std::remainder(x - ox, period), dy = std::remainder(y - oy, period);
          const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          const double gray = (c.at(y, x, 0) + c.at(y, x, 1) + c.at(y, x, 2)) / 3.0;
          for (int k = 0; k < 3; ++k) c.at(y, x, k) = 0.85 * c.at(y, x, k) + 0.15 * gray + 2.0 * amp * blob;
        }
      }
      break;
    }
  }
}

void gaussian_blur(Canvas& c, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-i * i / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;
  const int64_t n = c.size;
  Canvas tmp(n);
  for (int64_t y = 0; y < n; ++y)
    for (int64_t x = 0; x < n; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] * c.at(y, std::clamp<int64_t>(x + i, 0, n - 1), ch);
        tmp.at(y, x, ch) = acc;
      }
  for (int64_t y = 0; y < n; ++y)
    for (int64_t x = 0; x < n; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] * tmp.at(std::clamp<int64_t>(y + i, 0, n - 1), x, ch);
        c.at(y, x, ch) = acc;
      }
}

torch::Tensor finish(Canvas& c, const FaceParams& f, std::uint64_t noise_seed) {
  if (f.blur_sigma > 0.0) gaussian_blur(c, f.blur_sigma);
  if (f.noise_sigma > 0.0) {
    Uniform u(noise_seed);
    for (auto& v : c.px) v += f.noise_sigma * u.normal();
  }
  auto out = torch::empty({3, c.size, c.size}, torch::kUInt8);
  auto* p = out.data_ptr<std::uint8_t>();
  const int64_t plane = c.size * c.size;
  for (int64_t y = 0; y < c.size; ++y)
    for (int64_t x = 0; x < c.size; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        p[ch * plane + y * c.size + x] =
            static_cast<std::uint8_t>(std::lround(std::clamp(c.at(y, x, ch), 0.0, 1.0) * 255.0));
      }
  return out;
}

std::uint64_t image_seed(const SynthConfig& config, int64_t identity, int64_t style_slot) {
  return derive_seed(derive_seed(config.seed ^ 0x5eedULL, static_cast<std::uint64_t>(identity)),
                     static_cast<std::uint64_t>(style_slot));
}

}  // namespace

torch::Tensor render_live(const SynthConfig& config, int64_t identity) {
  validate(config);
  const auto f = face_params(config, identity);
  Canvas c = draw_face(f, config.size);
  return finish(c, f, image_seed(config, identity, 0));
}

torch::Tensor render_spoof(const SynthConfig& config, int64_t identity, int64_t style_id) {
  validate(config);
  require(style_id >= 0, "spoof style must be non-negative");
  const auto f = face_params(config, identity);
  Canvas c = draw_face(f, config.size);
  Uniform u(image_seed(config, identity, style_id + 1) ^ 0xa5a5a5a5ULL);
  const Canvas bare = c;
  apply_overlay(c, style_id, config.pattern_jitter, u);
  if (config.overlay_strength != 1.0) {
    for (std::size_t i = 0; i < c.px.size(); ++i) c.px[i] = bare.px[i] + config.overlay_strength * (c.px[i] - bare.px[i]);
  }
  return finish(c, f, image_seed(config, identity, style_id + 1));
}

fs::path synth_corpus(const SynthConfig& config, const fs::path& out_dir) {
  validate(config);
  std::error_code ec;
  fs::create_directories(out_dir / "live", ec);
  if (!ec) fs::create_directories(out_dir / "spoof", ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<SampleRecord> records;
  char name[64];
  for (int64_t id = 0; id < config.identities; ++id) {
    const int64_t domain = id % config.domains;
    std::snprintf(name, sizeof(name), "live/id%05lld.png", static_cast<long long>(id));
    write_png(out_dir / name, render_live(config, id));
    records.push_back({out_dir / name, Label::live, kNoStyle, domain, id});
    for (int64_t s = 0; s < config.styles; ++s) {
      std::snprintf(name, sizeof(name), "spoof/id%05lld_s%02lld.png", static_cast<long long>(id),
                    static_cast<long long>(s));
      write_png(out_dir / name, render_spoof(config, id, s));
      records.push_back({out_dir / name, Label::spoof, s, domain, id});
    }
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace spoofsynth
