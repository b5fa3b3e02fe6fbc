#include "grf/harness/pipeline.hpp"

#include "grf/gate/metrics.hpp"
#include "grf/harness/split.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace grf::harness {

namespace {

double auc_or_nan(const std::vector<double>& scores, const std::vector<bool>& labels) {
  try {
    return gate::auc(scores, labels);
  } catch (const gate::MetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

engine::SampleLog generate_samples(const ExperimentConfig& cfg, int n_users, std::uint64_t seed) {
  const sim::Catalog catalog = sim::gen_catalog(cfg.sim, seed);
  const engine::World world{&cfg.sim, &catalog, seed};
  engine::EngineConfig ec = cfg.engine;
  ec.arm = engine::Arm::base;
  engine::SampleLog log;
  for (int u = 1; u <= n_users; ++u) engine::run_session(u, world, {}, ec, cfg.features, &log);
  return log;
}

std::string GateEvaluation::to_text() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "samples=%zu positives=%zu auc=%.6f bayes_auc=%.6f recall_at_p0.7=%.6f\n", n,
                positives, auc, bayes_auc, recall_at_p70);
  return buf;
}

std::string RankEvaluation::to_text() const {
  std::string out = "samples=" + std::to_string(n) + "\n";
  char buf[160];
  for (int t = 0; t < kTaskCount; ++t) {
    std::snprintf(buf, sizeof buf, "%s model_auc=%.6f server_auc=%.6f\n", kTaskNames[t], tasks[std::size_t(t)].model_auc,
                  tasks[std::size_t(t)].server_auc);
    out += buf;
  }
  return out;
}

GateEvaluation evaluate_gate(const gate::GateModel& model, const std::vector<gate::GateSample>& samples) {
  GateEvaluation e;
  e.n = samples.size();
  if (samples.empty()) return e;
  std::vector<const features::GateFeatureVector*> batch;
  std::vector<bool> labels;
  std::vector<double> bayes;
  bool have_bayes = true;
  for (const auto& s : samples) {
    batch.push_back(&s.features);
    labels.push_back(s.label);
    bayes.push_back(s.bayes_logit);
    have_bayes = have_bayes && !std::isnan(s.bayes_logit);
    e.positives += s.label ? 1 : 0;
  }
  const auto scores = model.predict(batch);
  e.auc = auc_or_nan(scores, labels);
  if (have_bayes) e.bayes_auc = auc_or_nan(bayes, labels);
  if (e.positives > 0) e.recall_at_p70 = gate::recall_at_precision(scores, labels, 0.7);
  return e;
}

RankEvaluation evaluate_rank(const rank::RankModel& model, const std::vector<rank::RankSample>& samples) {
  RankEvaluation e;
  std::vector<const features::RankFeatureBundle*> batch;
  std::vector<const rank::RankSample*> labeled;
  for (const auto& s : samples) {
    if (!s.labels) continue;
    batch.push_back(&s.features);
    labeled.push_back(&s);
  }
  e.n = labeled.size();
  if (labeled.empty()) return e;
  const auto pred = model.predict(batch);
  for (int t = 0; t < kTaskCount; ++t) {
    std::vector<double> ours, server;
    std::vector<bool> y;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      ours.push_back(pred[i][t]);
      server.push_back(labeled[i]->server_pxtrs[t]);
      y.push_back((*labeled[i]->labels)[t]);
    }
    e.tasks[std::size_t(t)] = {auc_or_nan(ours, y), auc_or_nan(server, y)};
  }
  return e;
}

GatePipelineResult train_gate_pipeline(const ExperimentConfig& cfg, const std::vector<gate::GateSample>& samples,
                                       std::uint64_t seed) {
  const auto parts = split_dataset(samples, cfg.data.split(), seed);
  auto trained = gate::gate_train(parts.train, parts.valid, cfg.gate, cfg.features, seed);
  GatePipelineResult r{std::move(trained.model), std::move(trained.log), {}, {}};
  r.test = evaluate_gate(r.model, parts.test);
  r.split_sizes = {parts.train.size(), parts.valid.size(), parts.test.size()};
  return r;
}

RankPipelineResult train_rank_pipeline(const ExperimentConfig& cfg, const std::vector<rank::RankSample>& samples,
                                       std::uint64_t seed, const rank::RankCheckpointSink& sink) {
  auto parts = split_dataset(samples, cfg.data.split(), seed);
  std::stable_sort(parts.train.begin(), parts.train.end(),
                   [](const rank::RankSample& a, const rank::RankSample& b) { return a.event_time < b.event_time; });
  auto streamed = rank::rank_train_stream(parts.train, cfg.rank, cfg.features, seed, sink);
  RankPipelineResult r{std::move(streamed.model), {}, std::move(streamed.step_losses),
                       streamed.skipped_missing_labels, streamed.checkpoints_emitted, {}};
  r.test = evaluate_rank(r.model, parts.test);
  r.split_sizes = {parts.train.size(), parts.valid.size(), parts.test.size()};
  return r;
}

std::vector<engine::SessionReport> simulate_arm(const ExperimentConfig& cfg, const engine::Models& models,
                                                engine::Arm arm, int n_users, std::uint64_t seed) {
  const sim::Catalog catalog = sim::gen_catalog(cfg.sim, seed);
  const engine::World world{&cfg.sim, &catalog, seed};
  engine::EngineConfig ec = cfg.engine;
  ec.arm = arm;
  std::vector<engine::SessionReport> out;
  out.reserve(std::size_t(n_users));
  for (int u = 1; u <= n_users; ++u) out.push_back(engine::run_session(u, world, models, ec, cfg.features));
  return out;
}

std::vector<CurveBucket> watch_time_curve(const std::vector<engine::SessionReport>& sessions, double width,
                                          double max_rate) {
  std::map<long, std::pair<double, std::size_t>> acc;
  for (const auto& s : sessions) {
    if (s.impressions.empty()) continue;
    const long b = std::lround(s.choppy_rate() / width);
    if (double(b) * width > max_rate + 1e-12) continue;
    acc[b].first += s.watch_time_s;
    ++acc[b].second;
  }
  std::vector<CurveBucket> out;
  for (const auto& [b, v] : acc) out.push_back({double(b) * width, v.second, v.first / double(v.second)});
  return out;
}

}  // namespace grf::harness
