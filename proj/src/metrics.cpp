#include "spoofsynth/metrics.hpp"

#include "spoofsynth/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

namespace spoofsynth {

namespace {

struct Split {
  std::vector<double> live;
  std::vector<double> spoof;
};

Split split_scores(std::span<const double> scores, std::span<const std::uint8_t> is_live) {
  require(scores.size() == is_live.size(), "scores and labels differ in length");
  Split s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), "liveness scores must be finite");
    (is_live[i] ? s.live : s.spoof).push_back(scores[i]);
  }
  std::sort(s.live.begin(), s.live.end());
  std::sort(s.spoof.begin(), s.spoof.end());
  return s;
}

void require_both_classes(const Split& s) {
  require(!s.live.empty() && !s.spoof.empty(), "evaluation needs at least one live and one spoof sample");
}

std::size_t count_at_most(const std::vector<double>& sorted, double threshold) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), threshold) - sorted.begin());
}

double below(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_live) {
  const Split s = split_scores(scores, is_live);
  require_both_classes(s);
  // Twice the Mann-Whitney count: a win counts 2, a tie 1.
  std::uint64_t doubled = 0;
  for (double v : s.live) {
    const auto lo = std::lower_bound(s.spoof.begin(), s.spoof.end(), v);
    const auto hi = std::upper_bound(lo, s.spoof.end(), v);
    doubled += 2 * static_cast<std::uint64_t>(lo - s.spoof.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(s.live.size()) * static_cast<double>(s.spoof.size());
  return static_cast<double>(doubled) / (2.0 * pairs);
}

double eer_threshold(std::span<const double> scores, std::span<const std::uint8_t> is_live) {
  const Split s = split_scores(scores, is_live);
  require_both_classes(s);
  std::vector<double> candidates(scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.insert(candidates.begin(), below(candidates.front()));

  const auto n_live = static_cast<std::int64_t>(s.live.size());
  const auto n_spoof = static_cast<std::int64_t>(s.spoof.size());
  // Compare rates exactly by scaling both by n_live * n_spoof.
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  std::int64_t best_sum = std::numeric_limits<std::int64_t>::max();
  double best = candidates.front();
  for (double tau : candidates) {
    const auto rejected_live = static_cast<std::int64_t>(count_at_most(s.live, tau));
    const auto accepted_spoof = n_spoof - static_cast<std::int64_t>(count_at_most(s.spoof, tau));
    const std::int64_t far_scaled = accepted_spoof * n_live;
    const std::int64_t frr_scaled = rejected_live * n_spoof;
    const std::int64_t gap = std::llabs(far_scaled - frr_scaled);
    const std::int64_t sum = far_scaled + frr_scaled;
    if (gap < best_gap || (gap == best_gap && sum < best_sum)) {
      best_gap = gap;
      best_sum = sum;
      best = tau;
    }
  }
  return best;
}

ThresholdChoice threshold_for_bpcer(std::span<const double> dev_scores, std::span<const std::uint8_t> dev_is_live,
                                    double target) {
  require(target >= 0.0 && target <= 1.0, "BPCER target must lie in [0, 1]");
  const Split s = split_scores(dev_scores, dev_is_live);
  require(!s.live.empty(), "the development set contains no live samples");
  const auto n = static_cast<std::int64_t>(s.live.size());
  const double nd = static_cast<double>(n);

  // Largest number of rejected live samples whose rate stays within target.
  auto k = static_cast<std::int64_t>(std::floor(target * nd));
  while (k + 1 <= n && static_cast<double>(k + 1) / nd <= target) ++k;
  while (k > 0 && static_cast<double>(k) / nd > target) --k;

  ThresholdChoice choice;
  choice.attainable = !(target > 0.0 && k == 0);
  if (k >= n) {
    choice.threshold = std::max(s.live.back(), s.spoof.empty() ? s.live.back() : s.spoof.back());
  } else {
    choice.threshold = below(s.live[static_cast<std::size_t>(k)]);
  }
  return choice;
}

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> is_live,
                    const ThresholdPolicy& policy) {
  const Split s = split_scores(scores, is_live);
  require_both_classes(s);

  EvalReport r;
  if (const auto* fixed = std::get_if<FixedThreshold>(&policy)) {
    r.threshold = fixed->value;
  } else if (const auto* dev = std::get_if<BpcerOnDev>(&policy)) {
    const auto choice = threshold_for_bpcer(dev->dev_scores, dev->dev_is_live, dev->target);
    if (!choice.attainable) {
      std::fprintf(stderr, "warning: development set too small for BPCER target %g; using the closest attainable threshold\n",
                   dev->target);
    }
    r.threshold = choice.threshold;
  } else {
    r.threshold = eer_threshold(scores, is_live);
  }

  const auto n_live = static_cast<std::int64_t>(s.live.size());
  const auto n_spoof = static_cast<std::int64_t>(s.spoof.size());
  r.fn = static_cast<std::int64_t>(count_at_most(s.live, r.threshold));
  r.tp = n_live - r.fn;
  r.tn = static_cast<std::int64_t>(count_at_most(s.spoof, r.threshold));
  r.fp = n_spoof - r.tn;
  r.far = static_cast<double>(r.fp) / static_cast<double>(n_spoof);
  r.frr = static_cast<double>(r.fn) / static_cast<double>(n_live);
  r.apcer = r.far;
  r.bpcer = r.frr;
  r.hter = (r.far + r.frr) / 2.0;
  r.acer = (r.apcer + r.bpcer) / 2.0;
  r.auc = roc_auc(scores, is_live);
  return r;
}

std::string format_report(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-10s %10s\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.6g\n"
                "%-10s %4lld/%lld/%lld/%lld\n",
                "metric", "value", "HTER", r.hter, "AUC", r.auc, "ACER", r.acer, "APCER", r.apcer, "BPCER", r.bpcer,
                "threshold", r.threshold, "TP/FP/TN/FN", static_cast<long long>(r.tp), static_cast<long long>(r.fp),
                static_cast<long long>(r.tn), static_cast<long long>(r.fn));
  return buf;
}

}  // namespace spoofsynth
