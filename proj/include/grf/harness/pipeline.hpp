#pragma once

#include "grf/engine/engine.hpp"
#include "grf/harness/config.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace grf::harness {

/// Logs `n_users` base-arm sessions of the world seeded by `seed`. The base
/// arm shows the server list unchanged, so the logs are free of model bias.
engine::SampleLog generate_samples(const ExperimentConfig& cfg, int n_users, std::uint64_t seed);

struct GateEvaluation {
  std::size_t n = 0;
  std::size_t positives = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
  double bayes_auc = std::numeric_limits<double>::quiet_NaN();  // from the simulator's noise-free logit
  double recall_at_p70 = std::numeric_limits<double>::quiet_NaN();

  std::string to_text() const;
};

struct RankTaskEvaluation {
  double model_auc = std::numeric_limits<double>::quiet_NaN();
  double server_auc = std::numeric_limits<double>::quiet_NaN();
};

struct RankEvaluation {
  std::size_t n = 0;
  std::array<RankTaskEvaluation, kTaskCount> tasks;

  std::string to_text() const;
};

GateEvaluation evaluate_gate(const gate::GateModel& model, const std::vector<gate::GateSample>& samples);
RankEvaluation evaluate_rank(const rank::RankModel& model, const std::vector<rank::RankSample>& samples);

struct GatePipelineResult {
  gate::GateModel model;
  gate::GateTrainLog log;
  GateEvaluation test;
  std::array<std::size_t, 3> split_sizes{};
};

struct RankPipelineResult {
  rank::RankModel model;
  RankEvaluation test;
  std::vector<double> step_losses;
  long skipped_missing_labels = 0;
  int checkpoints_emitted = 0;
  std::array<std::size_t, 3> split_sizes{};
};

/// 8:1:1 split, training on the first part, early evaluation on the second
/// and the reported metrics on the third.
GatePipelineResult train_gate_pipeline(const ExperimentConfig& cfg, const std::vector<gate::GateSample>& samples,
                                       std::uint64_t seed);

/// 8:1:1 split; the training part is replayed once in event-time order.
RankPipelineResult train_rank_pipeline(const ExperimentConfig& cfg, const std::vector<rank::RankSample>& samples,
                                       std::uint64_t seed, const rank::RankCheckpointSink& sink = {});

/// Sessions of users 1..n_users in the world seeded by `seed`.
std::vector<engine::SessionReport> simulate_arm(const ExperimentConfig& cfg, const engine::Models& models,
                                                engine::Arm arm, int n_users, std::uint64_t seed);

struct CurveBucket {
  double choppy_rate = 0.0;  // bucket centre
  std::size_t sessions = 0;
  double mean_watch_time_s = 0.0;
};

/// Sessions grouped by their choppy rate, rounded to the nearest multiple of
/// `width`; buckets above `max_rate` are dropped.
std::vector<CurveBucket> watch_time_curve(const std::vector<engine::SessionReport>& sessions, double width,
                                          double max_rate);

}  // namespace grf::harness
