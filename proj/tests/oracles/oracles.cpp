#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace oracle {

namespace {

constexpr int64_t kMaxSide = 32;
constexpr std::size_t kMaxBatch = 100;

void guard(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Tokens patch_stats(const Map& map, int64_t patch, int kind) {
  guard(map.height <= kMaxSide && map.width <= kMaxSide, "oracle maps are limited to 32x32");
  guard(patch >= 1 && map.height % patch == 0 && map.width % patch == 0, "oracle patch must divide the map");
  const int64_t rows = map.height / patch, cols = map.width / patch;
  Tokens out;
  auto stat = [&](int64_t y0, int64_t x0, int64_t h, int64_t w) {
    std::vector<double> token(static_cast<std::size_t>(map.channels));
    for (int64_t c = 0; c < map.channels; ++c) {
      double sum = 0.0;
      for (int64_t y = y0; y < y0 + h; ++y)
        for (int64_t x = x0; x < x0 + w; ++x) sum += map.at(c, y, x);
      const double mean = sum / static_cast<double>(h * w);
      if (kind == 0) {
        token[static_cast<std::size_t>(c)] = mean;
        continue;
      }
      double ss = 0.0;
      for (int64_t y = y0; y < y0 + h; ++y)
        for (int64_t x = x0; x < x0 + w; ++x) ss += (map.at(c, y, x) - mean) * (map.at(c, y, x) - mean);
      token[static_cast<std::size_t>(c)] = ss / static_cast<double>(h * w);
    }
    return token;
  };
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t q = 0; q < cols; ++q) out.push_back(stat(r * patch, q * patch, patch, patch));
  out.push_back(stat(0, 0, map.height, map.width));
  return out;
}

std::vector<double> Linear::apply(const std::vector<double>& x) const {
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int64_t o = 0; o < out; ++o) {
    double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
    for (int64_t i = 0; i < in; ++i) acc += weight[static_cast<std::size_t>(o * in + i)] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

Tokens attention(const Tokens& query_tokens, const Tokens& cond_tokens, const Linear& wq, const Linear& wk,
                 const Linear& wv, int64_t heads) {
  Tokens q, k, v;
  for (const auto& t : query_tokens) q.push_back(wq.apply(t));
  for (const auto& t : cond_tokens) {
    k.push_back(wk.apply(t));
    v.push_back(wv.apply(t));
  }
  const auto width = static_cast<int64_t>(q.front().size());
  guard(heads >= 1 && width % heads == 0, "oracle heads must divide the width");
  const int64_t d = width / heads;
  Tokens out(q.size(), std::vector<double>(static_cast<std::size_t>(width), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (int64_t h = 0; h < heads; ++h) {
      std::vector<double> logits(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        double dot = 0.0;
        for (int64_t e = 0; e < d; ++e) {
          const auto c = static_cast<std::size_t>(h * d + e);
          dot += q[i][c] * k[j][c];
        }
        logits[j] = dot / std::sqrt(static_cast<double>(d));
      }
      const double top = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - top));
      for (std::size_t j = 0; j < k.size(); ++j)
        for (int64_t e = 0; e < d; ++e) {
          const auto c = static_cast<std::size_t>(h * d + e);
          out[i][c] += logits[j] / z * v[j][c];
        }
    }
  }
  return out;
}

std::vector<double> bilinear(const std::vector<double>& grid, int64_t rows, int64_t cols, int64_t height,
                             int64_t width) {
  auto source = [](int64_t dst, int64_t in, int64_t out, int64_t& i0, int64_t& i1, double& frac) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double src = std::max(0.0, (static_cast<double>(dst) + 0.5) * scale - 0.5);
    i0 = std::min<int64_t>(static_cast<int64_t>(std::floor(src)), in - 1);
    i1 = std::min<int64_t>(i0 + 1, in - 1);
    frac = src - static_cast<double>(i0);
  };
  std::vector<double> out(static_cast<std::size_t>(height * width));
  for (int64_t y = 0; y < height; ++y) {
    int64_t y0, y1;
    double fy;
    source(y, rows, height, y0, y1, fy);
    for (int64_t x = 0; x < width; ++x) {
      int64_t x0, x1;
      double fx;
      source(x, cols, width, x0, x1, fx);
      auto g = [&](int64_t r, int64_t c) { return grid[static_cast<std::size_t>(r * cols + c)]; };
      const double top = (1.0 - fx) * g(y0, x0) + fx * g(y0, x1);
      const double bottom = (1.0 - fx) * g(y1, x0) + fx * g(y1, x1);
      out[static_cast<std::size_t>(y * width + x)] = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& is_live) {
  guard(scores.size() <= kMaxBatch && scores.size() == is_live.size(), "oracle batches are limited to 100 scores");
  double credit = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_live[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (is_live[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) credit += 1.0;
      else if (scores[i] == scores[j]) credit += 0.5;
    }
  }
  return credit / pairs;
}

namespace {

struct Counts {
  int64_t live = 0, spoof = 0, rejected_live = 0, accepted_spoof = 0;
};

Counts count(const std::vector<double>& scores, const std::vector<int>& is_live, double threshold) {
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool accepted = scores[i] > threshold;
    if (is_live[i]) {
      ++c.live;
      if (!accepted) ++c.rejected_live;
    } else {
      ++c.spoof;
      if (accepted) ++c.accepted_spoof;
    }
  }
  return c;
}

}  // namespace

SweepResult rates_at(const std::vector<double>& scores, const std::vector<int>& is_live, double threshold) {
  const Counts c = count(scores, is_live, threshold);
  SweepResult r;
  r.threshold = threshold;
  r.far = static_cast<double>(c.accepted_spoof) / static_cast<double>(c.spoof);
  r.frr = static_cast<double>(c.rejected_live) / static_cast<double>(c.live);
  r.hter = (r.far + r.frr) / 2.0;
  return r;
}

SweepResult hter_sweep(const std::vector<double>& scores, const std::vector<int>& is_live) {
  guard(scores.size() <= kMaxBatch && scores.size() == is_live.size(), "oracle batches are limited to 100 scores");
  std::vector<double> candidates = scores;
  candidates.push_back(
      std::nextafter(*std::min_element(scores.begin(), scores.end()), -std::numeric_limits<double>::infinity()));
  bool have = false;
  int64_t best_gap = 0, best_sum = 0;
  double best_tau = 0.0;
  for (double tau : candidates) {
    const Counts c = count(scores, is_live, tau);
    // FAR - FRR and FAR + FRR, both times live * spoof.
    const int64_t a = c.accepted_spoof * c.live;
    const int64_t b = c.rejected_live * c.spoof;
    const int64_t gap = std::llabs(a - b);
    const int64_t sum = a + b;
    const bool better = !have || gap < best_gap || (gap == best_gap && sum < best_sum) ||
                        (gap == best_gap && sum == best_sum && tau < best_tau);
    if (better) {
      have = true;
      best_gap = gap;
      best_sum = sum;
      best_tau = tau;
    }
  }
  return rates_at(scores, is_live, best_tau);
}

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double alpha_bar(int64_t t, int64_t steps, double beta_start, double beta_end) {
  double prod = 1.0;
  for (int64_t i = 1; i <= t; ++i) {
    const double beta =
        steps == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * static_cast<double>(i - 1) / static_cast<double>(steps - 1);
    prod *= 1.0 - beta;
  }
  return prod;
}

std::vector<double> relative_quality(const std::vector<double>& b_aq) {
  const double n = static_cast<double>(b_aq.size());
  double mean = 0.0;
  for (double b : b_aq) mean += b;
  mean /= n;
  double var = 0.0;
  for (double b : b_aq) var += (b - mean) * (b - mean);
  const double sd = std::sqrt(var / n);
  double below = 0.0, above = 0.0;
  for (double b : b_aq) {
    below += b < mean ? 1.0 : 0.0;
    above += b > mean ? 1.0 : 0.0;
  }
  std::vector<double> out;
  for (double b : b_aq) {
    const double v = (mean - b) / (sd + 1e-9) / 3.0;
    out.push_back(std::min(std::max(v, -below / n), above / n));
  }
  return out;
}

double rq_loss_sample(const std::vector<double>& cos_row, int64_t label, double b_rq, double s, double m,
                      bool scale_non_target) {
  const auto y = static_cast<std::size_t>(label);
  const double theta = std::acos(std::clamp(cos_row[y], -1.0, 1.0));
  const double target = m * (std::cos(theta - s * b_rq) - s * (1.0 + b_rq));
  double z = std::exp(target);
  for (std::size_t j = 0; j < cos_row.size(); ++j) {
    if (j == y) continue;
    z += std::exp(scale_non_target ? m * cos_row[j] : cos_row[j]);
  }
  return -(target - std::log(z));
}

}  // namespace oracle
