#include "grf/gate/gate_model.hpp"
#include "grf/gate/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace grf::gate {

namespace {

struct BatchTargets {
  nn::MatrixF labels, weights;
};

BatchTargets targets_of(const GateConfig& cfg, const std::vector<const GateSample*>& batch) {
  BatchTargets t{nn::MatrixF(Index(batch.size()), 1), nn::MatrixF(Index(batch.size()), 1)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    t.labels(Index(i), 0) = batch[i]->label ? 1.0f : 0.0f;
    t.weights(Index(i), 0) = float(batch[i]->label ? cfg.class_weight_pos : cfg.class_weight_neg);
  }
  return t;
}

std::vector<const GateFeatureVector*> features_of(const std::vector<const GateSample*>& batch) {
  std::vector<const GateFeatureVector*> f;
  f.reserve(batch.size());
  for (const auto* s : batch) f.push_back(&s->features);
  return f;
}

}  // namespace

double gate_loss(const GateModel& model, const std::vector<const GateSample*>& samples) {
  if (samples.empty()) return 0.0;
  const auto t = targets_of(model.config(), samples);
  const nn::MatrixF z = model.net().logits(features_of(samples));
  return double(nn::weighted_bce_with_logits(z, t.labels, t.weights).loss);
}

double gate_train_step(GateModel& model, const std::vector<const GateSample*>& batch, double lr) {
  const auto t = targets_of(model.config(), batch);
  GateNet<float>::Cache cache;
  const nn::MatrixF z = model.net().logits(features_of(batch), &cache);
  auto lg = nn::weighted_bce_with_logits(z, t.labels, t.weights);
  model.net().backward(cache, lg.dlogits);
  nn::adam_step(model.params(), lr);
  ++model.step;
  return double(lg.loss);
}

GateTrainResult gate_train(const std::vector<GateSample>& train, const std::vector<GateSample>& validation,
                           const GateConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed) {
  cfg.validate();
  const auto pos = std::count_if(train.begin(), train.end(), [](const GateSample& s) { return s.label; });
  if (pos == 0 || pos == long(train.size()))
    throw ConfigError("gate training needs both choppy and smooth samples");

  GateTrainResult result{GateModel(cfg, schema, seed), {}};
  GateModel& model = result.model;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<const GateFeatureVector*> val_features;
  std::vector<bool> val_labels;
  for (const auto& s : validation) {
    val_features.push_back(&s.features);
    val_labels.push_back(s.label);
  }
  const bool val_usable =
      std::count(val_labels.begin(), val_labels.end(), true) > 0 &&
      std::count(val_labels.begin(), val_labels.end(), false) > 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      if (cfg.max_steps > 0 && model.step >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      std::vector<const GateSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
      const double lr = cfg.lr.at(model.step);
      const double loss = gate_train_step(model, batch, lr);
      result.log.steps.push_back({model.step, loss, lr});
      loss_sum += loss;
      ++batches;
    }
    GateEpochLog e;
    e.epoch = epoch + 1;
    e.train_loss = batches ? loss_sum / double(batches) : 0.0;
    if (val_usable) e.val_auc = auc(model.predict(val_features), val_labels);
    result.log.epochs.push_back(e);
    if (cfg.max_steps > 0 && model.step >= cfg.max_steps) break;
  }
  return result;
}

std::string GateTrainLog::to_text() const {
  std::ostringstream os;
  char line[128];
  for (const auto& s : steps) {
    std::snprintf(line, sizeof line, "step %lld loss %.6f lr %.6g\n", static_cast<long long>(s.step), s.loss, s.lr);
    os << line;
  }
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "epoch %d train_loss %.6f val_auc %.6f\n", e.epoch, e.train_loss, e.val_auc);
    os << line;
  }
  return os.str();
}

}  // namespace grf::gate
