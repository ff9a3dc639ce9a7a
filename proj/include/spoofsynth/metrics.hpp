#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>

namespace spoofsynth {

/// Liveness scores are higher for live faces. A sample is accepted as live
/// when its score is strictly greater than the threshold.
struct EvalReport {
  double hter = 0.0;
  double auc = 0.0;
  double acer = 0.0;
  double apcer = 0.0;  // spoof samples accepted as live
  double bpcer = 0.0;  // live samples rejected
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct FixedThreshold {
  double value = 0.5;
};

/// Threshold chosen on a development set for a target live-rejection rate.
struct BpcerOnDev {
  double target = 0.01;
  std::span<const double> dev_scores;
  std::span<const std::uint8_t> dev_is_live;
};

/// Threshold on the evaluated set where |FAR - FRR| is smallest (ties: lowest
/// HTER, then lowest threshold).
struct EqualErrorRate {};

using ThresholdPolicy = std::variant<FixedThreshold, BpcerOnDev, EqualErrorRate>;

/// is_live[i] != 0 marks bona fide samples. Needs both classes present.
EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> is_live,
                    const ThresholdPolicy& policy);

/// Area under the ROC curve, ties counted as one half.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_live);

struct ThresholdChoice {
  double threshold = 0.0;
  bool attainable = true;  // false when the dev set is too small for the target
};

/// Largest threshold whose live-rejection rate on the dev set is <= target.
ThresholdChoice threshold_for_bpcer(std::span<const double> dev_scores, std::span<const std::uint8_t> dev_is_live,
                                    double target);

/// Threshold minimising |FAR - FRR| over every distinct partition.
double eer_threshold(std::span<const double> scores, std::span<const std::uint8_t> is_live);

/// Aligned text table of the main rates.
std::string format_report(const EvalReport& report);

}  // namespace spoofsynth
