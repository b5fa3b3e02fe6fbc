#include "grf/rank/rank_model.hpp"

#include "grf/nn/init.hpp"

#include <random>

namespace grf::rank {

namespace {

constexpr std::size_t kInferenceChunk = 256;

std::vector<PxtrVector> to_pxtrs(const nn::MatrixF& z) {
  std::vector<PxtrVector> out(std::size_t(z.rows()));
  for (Index i = 0; i < z.rows(); ++i)
    out[std::size_t(i)] = {double(nn::sigmoid(z(i, 0))), double(nn::sigmoid(z(i, 1))), double(nn::sigmoid(z(i, 2))),
                           double(nn::sigmoid(z(i, 3)))};
  return out;
}

}  // namespace

RankModel::RankModel(const RankConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed)
    : cfg_(cfg), schema_(schema), params_(std::make_unique<nn::ParameterSet<float>>()) {
  cfg_.validate();
  schema_.validate();
  net_ = std::make_unique<RankNet<float>>(*params_, cfg_, schema_);
  std::mt19937_64 rng(seed);
  nn::initialize(*params_, rng);
}

PxtrVector RankModel::predict(const RankFeatureBundle& b) const { return predict(std::vector{&b}).front(); }

std::vector<PxtrVector> RankModel::predict(const std::vector<const RankFeatureBundle*>& batch) const {
  for (const auto* b : batch) features::validate_codes(*b, schema_);
  std::vector<PxtrVector> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(batch.size(), start + kInferenceChunk);
    std::vector<const RankFeatureBundle*> chunk(batch.begin() + long(start), batch.begin() + long(end));
    for (const auto& p : to_pxtrs(net_->logits(chunk))) out.push_back(p);
  }
  return out;
}

std::vector<PxtrVector> RankModel::predict_candidates(const SessionState& session, const DeviceState& device,
                                                      const std::vector<const CachedVideo*>& candidates,
                                                      const std::vector<VideoMeta>& upcoming_rest) const {
  if (candidates.empty()) return {};
  std::vector<features::RankFeatureBundle> bundles;
  bundles.reserve(candidates.size());
  for (const auto* c : candidates) {
    bundles.push_back(features::build_rank_features(session, device, *c, upcoming_rest, schema_));
    features::validate_codes(bundles.back(), schema_);
  }
  std::vector<const features::FeatureRow*> targets;
  for (const auto& b : bundles) targets.push_back(&b.target);
  const auto& shared = bundles.front();
  return to_pxtrs(net_->logits_shared(targets, shared.watched_seq, shared.upcoming_seq, shared.context));
}

std::optional<std::size_t> select_best_by_score(const std::vector<const CachedVideo*>& candidates,
                                                const std::vector<double>& scores) {
  if (candidates.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = *candidates[i];
    const auto& b = *candidates[best];
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         (a.cached_at > b.cached_at || (a.cached_at == b.cached_at && a.meta.id < b.meta.id))))
      best = i;
  }
  return best;
}

std::optional<std::size_t> select_best(const std::vector<const CachedVideo*>& candidates, const SessionState& session,
                                       const DeviceState& device, const std::vector<VideoMeta>& upcoming_rest,
                                       const RankModel& model) {
  if (candidates.empty()) return std::nullopt;
  const auto pxtrs = model.predict_candidates(session, device, candidates, upcoming_rest);
  std::vector<double> scores;
  for (const auto& p : pxtrs) scores.push_back(rank_score(p, model.config().score_weights));
  return select_best_by_score(candidates, scores);
}

}  // namespace grf::rank
