#include "spoofsynth/classifier.hpp"

#include "spoofsynth/common.hpp"
#include "spoofsynth/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace spoofsynth {

int64_t ClassLayout::class_of(const SampleRecord& r) const {
  if (r.label == Label::live) {
    if (!live_per_domain) return 0;
    require(r.domain_id >= 0 && r.domain_id < domains, "domain id outside the class layout");
    return r.domain_id;
  }
  require(r.style_id >= 0 && r.style_id < styles, "style id outside the class layout");
  return live_classes() + r.style_id;
}

ClassLayout layout_for(const std::vector<SampleRecord>& records, bool live_per_domain) {
  ClassLayout layout;
  layout.live_per_domain = live_per_domain;
  int64_t max_domain = 0, max_style = -1;
  for (const auto& r : records) {
    if (r.domain_id < 0) throw DataError("negative domain id in " + r.path.string());
    max_domain = std::max(max_domain, r.domain_id);
    if (r.label == Label::spoof) max_style = std::max(max_style, r.style_id);
  }
  if (max_style < 0) throw DataError("no spoof samples: the spoof classes would be empty");
  layout.domains = max_domain + 1;
  layout.styles = max_style + 1;
  return layout;
}

void validate(const ClassifierConfig& c) {
  require(c.image_size >= 16, "classifier image size must be >= 16");
  require(!c.channels.empty(), "classifier needs at least one stage");
  for (int64_t ch : c.channels) require(ch > 0 && ch % c.groups == 0, "stage channels must be multiples of groups");
  require(c.embed_dim > 0, "embedding dimension must be positive");
  require(c.learning_rate > 0.0, "learning rate must be positive");
  require(c.epochs >= 1 && c.batch_size >= 2, "need epochs >= 1 and batch size >= 2");
}

ClassifierNetImpl::ClassifierNetImpl(ClassifierConfig config, int64_t num_classes)
    : config_(std::move(config)), num_classes_(num_classes) {
  validate(config_);
  require(num_classes_ >= 2, "classifier needs at least two classes");
  torch::nn::Sequential seq;
  int64_t in = 3;
  for (int64_t ch : config_.channels) {
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, ch, 3).stride(2).padding(1)));
    seq->push_back(torch::nn::GroupNorm(config_.groups, ch));
    seq->push_back(torch::nn::SiLU());
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).padding(1)));
    seq->push_back(torch::nn::GroupNorm(config_.groups, ch));
    seq->push_back(torch::nn::SiLU());
    in = ch;
  }
  seq->push_back(torch::nn::AdaptiveAvgPool2d(1));
  seq->push_back(torch::nn::Flatten());
  backbone = register_module("backbone", seq);
  embedding = register_module("embedding", torch::nn::Linear(in, config_.embed_dim));
  class_weights = register_parameter("class_weights", torch::randn({num_classes_, config_.embed_dim}) * 0.1);
}

torch::Tensor ClassifierNetImpl::embed(const torch::Tensor& x) { return embedding->forward(backbone->forward(x)); }

torch::Tensor ClassifierNetImpl::forward(const torch::Tensor& x) { return cosine_logits(embed(x), class_weights); }

namespace {

void check_data(const ClassifierData& d, const ClassLayout& layout) {
  const auto n = static_cast<std::size_t>(d.images.size(0));
  require(d.images.dim() == 4, "classifier images must be (N, 3, H, W)");
  require(d.classes.size() == n && d.is_live.size() == n, "classifier labels are misaligned with the images");
  if (d.b_aq.size() != n) throw DataError("quality scores missing for some training samples");
  for (double b : d.b_aq) {
    if (!std::isfinite(b)) throw DataError("non-finite quality score in the training set");
  }
  std::set<int64_t> present;
  for (std::size_t i = 0; i < n; ++i) {
    require(d.classes[i] >= 0 && d.classes[i] < layout.num_classes(), "class index outside the layout");
    require(layout.is_live_class(d.classes[i]) == (d.is_live[i] != 0), "class index disagrees with the live flag");
    present.insert(layout.is_live_class(d.classes[i]) ? 0 : 1);
  }
  if (present.size() < 2) throw DataError("training data must contain both live and spoof samples");
}

}  // namespace

ClassifierTrainResult train_classifier(const ClassifierData& data, const ClassLayout& layout,
                                       const MarginParams& params, const ClassifierConfig& config,
                                       const std::function<void(const EpochLog&)>& on_epoch) {
  validate(params);
  validate(config);
  check_data(data, layout);

  torch::manual_seed(config.seed);
  ClassifierNet net(config, layout.num_classes());
  net->train();
  std::unique_ptr<torch::optim::Optimizer> optimizer;
  if (config.optimizer == OptimizerKind::adam) {
    optimizer = std::make_unique<torch::optim::Adam>(
        net->parameters(), torch::optim::AdamOptions(config.learning_rate).weight_decay(config.weight_decay));
  } else {
    optimizer = std::make_unique<torch::optim::SGD>(
        net->parameters(),
        torch::optim::SGDOptions(config.learning_rate).momentum(config.momentum).weight_decay(config.weight_decay));
  }

  const int64_t n = data.images.size(0);
  const auto classes = torch::tensor(data.classes, torch::kLong);
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(config.seed, 2));

  ClassifierTrainResult result;
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int64_t batches = 0;
    std::vector<double> all_rq;
    for (int64_t start = 0; start + 1 < n; start += config.batch_size) {
      const int64_t len = std::min(config.batch_size, n - start);
      if (len < 2) break;
      std::vector<int64_t> idx(order.begin() + start, order.begin() + start + len);
      std::vector<double> b_aq;
      std::vector<uint8_t> live;
      for (int64_t i : idx) {
        b_aq.push_back(data.b_aq[static_cast<std::size_t>(i)]);
        live.push_back(data.is_live[static_cast<std::size_t>(i)]);
      }
      const auto q = relative_quality(b_aq);
      all_rq.insert(all_rq.end(), q.b_rq.begin(), q.b_rq.end());

      const auto index = torch::tensor(idx, torch::kLong);
      const auto cos = net->forward(data.images.index_select(0, index));
      const auto b_rq = torch::tensor(q.b_rq, torch::kFloat64).to(cos.scalar_type());
      const auto is_live = torch::tensor(std::vector<int64_t>(live.begin(), live.end()), torch::kLong).to(torch::kBool);
      auto loss = rq_loss(cos, classes.index_select(0, index), b_rq, is_live, params);
      optimizer->zero_grad();
      loss.backward();
      optimizer->step();
      loss_sum += loss.item<double>();
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    if (!all_rq.empty()) {
      const double mean = std::accumulate(all_rq.begin(), all_rq.end(), 0.0) / static_cast<double>(all_rq.size());
      double ss = 0.0;
      for (double v : all_rq) ss += (v - mean) * (v - mean);
      log.b_rq_mean = mean;
      log.b_rq_std = std::sqrt(ss / static_cast<double>(all_rq.size()));
      log.b_rq_min = *std::min_element(all_rq.begin(), all_rq.end());
      log.b_rq_max = *std::max_element(all_rq.begin(), all_rq.end());
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  net->eval();
  result.model = ClassifierModel{net, layout, params};
  return result;
}

std::vector<double> liveness_scores(const ClassifierModel& model, const torch::Tensor& images) {
  require(images.dim() == 4, "images must be (N, 3, H, W)");
  torch::NoGradGuard guard;
  auto net = model.net;
  net->eval();
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(images.size(0)));
  const int64_t live = model.layout.live_classes();
  for (int64_t start = 0; start < images.size(0); start += 64) {
    const int64_t len = std::min<int64_t>(64, images.size(0) - start);
    const auto logits = inference_logits(net->forward(images.narrow(0, start, len)), model.params);
    const auto probs = torch::softmax(logits.to(torch::kFloat64), 1);
    const auto live_prob = probs.narrow(1, 0, live).sum(1).contiguous();
    const auto* p = live_prob.data_ptr<double>();
    scores.insert(scores.end(), p, p + len);
  }
  return scores;
}

}  // namespace spoofsynth
