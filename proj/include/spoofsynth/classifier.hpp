#pragma once

#include "spoofsynth/data.hpp"
#include "spoofsynth/rq_loss.hpp"

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

namespace spoofsynth {

/// Class indices: live classes first (one per domain, or a single one), then
/// one class per spoof style.
struct ClassLayout {
  int64_t domains = 1;
  int64_t styles = 1;
  bool live_per_domain = true;

  int64_t live_classes() const { return live_per_domain ? domains : 1; }
  int64_t num_classes() const { return live_classes() + styles; }
  int64_t class_of(const SampleRecord& record) const;
  bool is_live_class(int64_t cls) const { return cls < live_classes(); }
};

/// Layout covering every domain and style present in the records.
ClassLayout layout_for(const std::vector<SampleRecord>& records, bool live_per_domain = true);

enum class OptimizerKind { adam, sgd };

struct ClassifierConfig {
  int64_t image_size = 64;
  /// One stride-2 stage per entry.
  std::vector<int64_t> channels{16, 32, 64};
  int64_t embed_dim = 64;
  int64_t groups = 8;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int64_t epochs = 20;
  int64_t batch_size = 32;
  std::uint64_t seed = 0;
};

void validate(const ClassifierConfig& config);

/// Convolutional backbone with a cosine classification head.
class ClassifierNetImpl : public torch::nn::Module {
 public:
  ClassifierNetImpl(ClassifierConfig config, int64_t num_classes);

  torch::Tensor embed(const torch::Tensor& x);
  /// Cosine similarities (B, num_classes).
  torch::Tensor forward(const torch::Tensor& x);

  const ClassifierConfig& config() const { return config_; }
  int64_t num_classes() const { return num_classes_; }

 private:
  ClassifierConfig config_;
  int64_t num_classes_;
  torch::nn::Sequential backbone{nullptr};
  torch::nn::Linear embedding{nullptr};
  torch::Tensor class_weights;
};
TORCH_MODULE(ClassifierNet);

struct ClassifierData {
  torch::Tensor images;          // (N, 3, H, W) in [-1, 1]
  std::vector<int64_t> classes;  // per ClassLayout
  std::vector<uint8_t> is_live;
  std::vector<double> b_aq;      // absolute quality score per sample
};

struct EpochLog {
  int64_t epoch = 0;
  double mean_loss = 0.0;
  double b_rq_mean = 0.0;
  double b_rq_std = 0.0;
  double b_rq_min = 0.0;
  double b_rq_max = 0.0;
};

struct ClassifierModel {
  ClassifierNet net{nullptr};
  ClassLayout layout;
  MarginParams params;
};

struct ClassifierTrainResult {
  ClassifierModel model;
  std::vector<EpochLog> epochs;
};

/// Trains under rq_loss with per-batch relative quality.
ClassifierTrainResult train_classifier(const ClassifierData& data, const ClassLayout& layout,
                                       const MarginParams& params, const ClassifierConfig& config,
                                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Summed softmax probability of the live classes under the inference logits.
std::vector<double> liveness_scores(const ClassifierModel& model, const torch::Tensor& images);

}  // namespace spoofsynth
