#pragma once

#include "grf/features/featurize.hpp"
#include "grf/gate/gate_config.hpp"
#include "grf/gate/gate_net.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace grf::gate {

struct GateSample {
  GateFeatureVector features;
  bool label = false;
  // Noise-free choppiness logit from the simulator; NaN when unknown.
  double bayes_logit = std::numeric_limits<double>::quiet_NaN();
};

class GateModel {
 public:
  GateModel(const GateConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed);

  /// Probability that playback of the target will be choppy.
  double predict(const GateFeatureVector& f) const;
  std::vector<double> predict(const std::vector<const GateFeatureVector*>& batch) const;

  bool is_choppy(double p) const { return p >= cfg_.threshold; }

  std::size_t parameter_count() const { return params_->scalar_count(); }
  nn::ParameterSet<float>& params() { return *params_; }
  const nn::ParameterSet<float>& params() const { return *params_; }
  GateNet<float>& net() { return *net_; }
  const GateNet<float>& net() const { return *net_; }
  const GateConfig& config() const { return cfg_; }
  const features::FeatureSchema& schema() const { return schema_; }

  std::int64_t step = 0;

 private:
  GateConfig cfg_;
  features::FeatureSchema schema_;
  std::unique_ptr<nn::ParameterSet<float>> params_;
  std::unique_ptr<GateNet<float>> net_;
};

struct GateStepLog {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct GateEpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
};

struct GateTrainLog {
  std::vector<GateStepLog> steps;
  std::vector<GateEpochLog> epochs;

  std::string to_text() const;
};

struct GateTrainResult {
  GateModel model;
  GateTrainLog log;
};

/// Mean class-weighted binary cross-entropy of `model` over `samples`.
double gate_loss(const GateModel& model, const std::vector<const GateSample*>& samples);

/// One optimizer step on a batch; returns the batch loss before the update.
double gate_train_step(GateModel& model, const std::vector<const GateSample*>& batch, double lr);

GateTrainResult gate_train(const std::vector<GateSample>& train, const std::vector<GateSample>& validation,
                           const GateConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed);

}  // namespace grf::gate
