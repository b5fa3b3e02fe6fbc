#include "grf/nn/optim.hpp"
#include "grf/rank/rank_model.hpp"

namespace grf::rank {

namespace {

nn::MatrixF label_matrix(const std::vector<const RankSample*>& batch) {
  nn::MatrixF y(Index(batch.size()), kTaskCount);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (int t = 0; t < kTaskCount; ++t) y(Index(i), t) = (*batch[i]->labels)[t] ? 1.0f : 0.0f;
  return y;
}

std::vector<const RankFeatureBundle*> bundles_of(const std::vector<const RankSample*>& batch) {
  std::vector<const RankFeatureBundle*> out;
  for (const auto* s : batch) out.push_back(&s->features);
  return out;
}

}  // namespace

double rank_loss(const RankModel& model, const std::vector<const RankSample*>& samples) {
  std::vector<const RankSample*> labeled;
  for (const auto* s : samples)
    if (s->labels) labeled.push_back(s);
  if (labeled.empty()) return 0.0;
  const nn::MatrixF z = model.net().logits(bundles_of(labeled));
  return double(nn::weighted_bce_with_logits(z, label_matrix(labeled), nn::MatrixF()).loss);
}

RankStreamResult rank_train_stream(const std::vector<RankSample>& samples, const RankConfig& cfg,
                                   const features::FeatureSchema& schema, std::uint64_t seed,
                                   const RankCheckpointSink& sink) {
  RankStreamResult result{RankModel(cfg, schema, seed), {}, 0, 0};
  RankModel& model = result.model;
  std::vector<const RankSample*> batch;

  auto flush = [&] {
    if (batch.empty()) return;
    RankNet<float>::Cache cache;
    const nn::MatrixF z = model.net().logits(bundles_of(batch), &cache);
    // Unweighted mean per task, summed over the four tasks.
    auto lg = nn::weighted_bce_with_logits(z, label_matrix(batch), nn::MatrixF());
    model.net().backward(cache, lg.dlogits);
    nn::adam_step(model.params(), cfg.lr);
    ++model.step;
    model.samples_seen += long(batch.size());
    result.step_losses.push_back(double(lg.loss));
    batch.clear();
    if (model.step % cfg.checkpoint_interval_steps == 0) {
      ++result.checkpoints_emitted;
      if (sink) sink(model);
    }
  };

  for (const auto& s : samples) {
    if (!s.labels) {
      ++result.skipped_missing_labels;
      continue;
    }
    batch.push_back(&s);
    if (int(batch.size()) == cfg.batch_size) flush();
  }
  flush();
  return result;
}

}  // namespace grf::rank
