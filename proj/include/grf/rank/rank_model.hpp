#pragma once

#include "grf/cache/cached_video.hpp"
#include "grf/features/featurize.hpp"
#include "grf/rank/rank_config.hpp"
#include "grf/rank/rank_net.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace grf::rank {

class RankModel {
 public:
  RankModel(const RankConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed);

  PxtrVector predict(const RankFeatureBundle& b) const;
  std::vector<PxtrVector> predict(const std::vector<const RankFeatureBundle*>& batch) const;

  /// Predictions for several candidates in one session context.
  std::vector<PxtrVector> predict_candidates(const SessionState& session, const DeviceState& device,
                                             const std::vector<const CachedVideo*>& candidates,
                                             const std::vector<VideoMeta>& upcoming_rest) const;

  std::size_t parameter_count() const { return params_->scalar_count(); }
  nn::ParameterSet<float>& params() { return *params_; }
  const nn::ParameterSet<float>& params() const { return *params_; }
  RankNet<float>& net() { return *net_; }
  const RankNet<float>& net() const { return *net_; }
  const RankConfig& config() const { return cfg_; }
  const features::FeatureSchema& schema() const { return schema_; }

  std::int64_t step = 0;
  std::int64_t samples_seen = 0;

 private:
  RankConfig cfg_;
  features::FeatureSchema schema_;
  std::unique_ptr<nn::ParameterSet<float>> params_;
  std::unique_ptr<RankNet<float>> net_;
};

/// Index of the highest score; ties go to the most recent cached_at, then the
/// lowest video id. Empty input gives nullopt.
std::optional<std::size_t> select_best_by_score(const std::vector<const CachedVideo*>& candidates,
                                                const std::vector<double>& scores);

/// Model-driven choice among cached candidates.
std::optional<std::size_t> select_best(const std::vector<const CachedVideo*>& candidates, const SessionState& session,
                                       const DeviceState& device, const std::vector<VideoMeta>& upcoming_rest,
                                       const RankModel& model);

struct RankSample {
  RankFeatureBundle features;
  std::optional<EngagementLabels> labels;  // missing labels are skipped in training
  PxtrVector server_pxtrs;                 // server baseline scores for evaluation
  double event_time = 0.0;
};

struct RankStreamResult {
  RankModel model;
  std::vector<double> step_losses;
  long skipped_missing_labels = 0;
  int checkpoints_emitted = 0;
};

using RankCheckpointSink = std::function<void(const RankModel&)>;

/// Mean of the summed per-task binary cross-entropies over `samples`.
double rank_loss(const RankModel& model, const std::vector<const RankSample*>& samples);

/// Single pass over time-ordered samples. `sink` receives the model every
/// checkpoint_interval_steps optimizer steps.
RankStreamResult rank_train_stream(const std::vector<RankSample>& samples, const RankConfig& cfg,
                                   const features::FeatureSchema& schema, std::uint64_t seed,
                                   const RankCheckpointSink& sink = {});

}  // namespace grf::rank
