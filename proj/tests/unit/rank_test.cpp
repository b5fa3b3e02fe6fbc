#include "grf/nn/init.hpp"
#include "grf/rank/rank_model.hpp"
#include "support/fixtures.hpp"
#include "support/layer_gradient_suite.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

using namespace grf;
using namespace grf::rank;
using features::FeatureSchema;
using grf::test_support::golden_candidate;
using grf::test_support::golden_device;
using grf::test_support::golden_session;
using grf::test_support::make_video;
using grf::test_support::random_matrix;

namespace {

SessionState random_session(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SessionState s;
  const int n = int(u(rng) * 25);
  for (int i = 0; i < n; ++i) {
    WatchedRecord w;
    w.video = make_video(i + 1, 5 + u(rng) * 100, 300 + u(rng) * 4000, int(u(rng) * 3),
                         {u(rng), u(rng), u(rng), u(rng)});
    w.pxtrs = w.video.server_pxtrs;
    w.watch_time_s = u(rng) * w.video.duration_s;
    w.labels = {w.watch_time_s >= 7, w.watch_time_s >= 18, w.watch_time_s < 3, u(rng) < 0.2};
    w.choppy = u(rng) < 0.1;
    s.push_watched(w);
  }
  return s;
}

RankSample random_sample(std::mt19937_64& rng, const FeatureSchema& schema) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SessionState s = random_session(rng);
  CachedVideo c;
  c.meta = make_video(1000, 5 + u(rng) * 100, 300 + u(rng) * 4000, int(u(rng) * 3), {u(rng), u(rng), u(rng), u(rng)});
  c.cached_ratio = u(rng);
  c.cached_duration_s = c.cached_ratio * c.meta.duration_s;
  std::vector<VideoMeta> rest;
  const int n_up = int(u(rng) * 12);
  for (int i = 0; i < n_up; ++i) rest.push_back(make_video(2000 + i, 10 + 50 * u(rng), 900, 1, {u(rng), u(rng), u(rng), u(rng)}));
  RankSample out;
  out.features = features::build_rank_features(s, {u(rng), u(rng), u(rng) * 8000, true}, c, rest, schema);
  out.server_pxtrs = c.meta.server_pxtrs;
  // Labels follow the server pxtrs so the tasks are learnable.
  const auto& p = c.meta.server_pxtrs;
  out.labels = EngagementLabels{u(rng) < p.evr, u(rng) < p.lvr, u(rng) < p.svr, u(rng) < p.fpr};
  return out;
}

FeatureSchema tiny_schema() {
  FeatureSchema s;
  s.n_bins = 4;
  s.embed_dim = 2;
  s.soft_meta = 2;
  s.watched_len = 3;
  s.upcoming_len = 2;
  return s;
}

RankConfig tiny_config() {
  RankConfig c;
  c.n_heads = 2;
  c.d_head = 2;
  c.attn_out = 3;
  c.n_experts = 2;
  c.expert_hidden = 3;
  c.tower_hidden = 2;
  return c;
}

}  // namespace

TEST(MultiHeadAttention, SingletonGivesValueProjection) {
  nn::ParameterSet<double> ps;
  nn::TargetAttention<double> att(ps, "a", 3, 4, 2, 3);
  std::mt19937_64 rng(1);
  grf::test_support::randomize(ps, rng);
  nn::MatrixD q = random_matrix(rng, 1, 3), s = random_matrix(rng, 1, 4);
  nn::Mask m = nn::Mask::Ones(1, 1);
  const auto out = att.forward(q, s, m);
  EXPECT_LT((out - s * att.value_proj().weight().value).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiHeadAttention, StackIsZeroForEmptySequence) {
  nn::ParameterSet<double> ps;
  AttentionStack<double> stack(ps, "s", 3, 4, tiny_config());
  std::mt19937_64 rng(2);
  grf::test_support::randomize(ps, rng);
  nn::Mask m = nn::Mask::Zero(2, 3);
  const auto out = stack.forward(random_matrix(rng, 2, 3), random_matrix(rng, 6, 4), m);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MultiHeadAttention, HandComputedTwoRowWeights) {
  nn::ParameterSet<double> ps;
  nn::TargetAttention<double> att(ps, "a", 2, 2, 1, 2);
  att.query_proj().weight().value.setIdentity();
  att.key_proj().weight().value.setIdentity();
  att.value_proj().weight().value.setIdentity();
  // q.k1/sqrt(2) = 0.8, q.k2/sqrt(2) = 0.2
  nn::MatrixD q(1, 2), s(2, 2);
  q << 1.0, 0.0;
  s << 0.8 * std::sqrt(2.0), 3.0, 0.2 * std::sqrt(2.0), -1.0;
  nn::Mask m = nn::Mask::Ones(1, 2);
  const double w1 = std::exp(0.8) / (std::exp(0.8) + std::exp(0.2));
  const auto out = att.forward(q, s, m);
  EXPECT_NEAR(out(0, 0), w1 * s(0, 0) + (1 - w1) * s(1, 0), 1e-6);
  EXPECT_NEAR(out(0, 1), w1 * 3.0 + (1 - w1) * -1.0, 1e-6);
}

TEST(MMoE, IdenticalExpertsMakeGatesIrrelevant) {
  nn::ParameterSet<double> ps;
  nn::MMoE<double> mmoe(ps, "m", {3, 4, 5, 5, 4, 3});
  std::mt19937_64 rng(3);
  grf::test_support::randomize(ps, rng);
  for (std::size_t e = 1; e < 4; ++e) {
    mmoe.expert_layer1(e).weight().value = mmoe.expert_layer1(0).weight().value;
    mmoe.expert_layer1(e).bias()->value = mmoe.expert_layer1(0).bias()->value;
    mmoe.expert_layer2(e).weight().value = mmoe.expert_layer2(0).weight().value;
    mmoe.expert_layer2(e).bias()->value = mmoe.expert_layer2(0).bias()->value;
  }
  nn::MMoE<double>::Cache c;
  mmoe.forward(random_matrix(rng, 2, 3), &c);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_LT((c.mixed[t] - c.mixed[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MMoE, OneHotGateSelectsExpert) {
  nn::ParameterSet<double> ps;
  nn::MMoE<double> mmoe(ps, "m", {3, 8, 5, 5, 4, 3});
  std::mt19937_64 rng(4);
  grf::test_support::randomize(ps, rng);
  for (std::size_t t = 0; t < 4; ++t) {
    mmoe.gate(t).weight().value.setZero();
    mmoe.gate(t).bias()->value.setConstant(-1e3);
    mmoe.gate(t).bias()->value(0, 3) = 0.0;
  }
  nn::MMoE<double>::Cache c;
  mmoe.forward(random_matrix(rng, 2, 3), &c);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(c.mixed[t], c.experts[3]);
    EXPECT_NEAR(c.gate_weights[t].rowwise().sum().minCoeff(), 1.0, 1e-12);
  }
}

TEST(MMoE, MatchesScalarReference) {
  nn::ParameterSet<double> ps;
  const int din = 3, ne = 2, eh = 3, th = 2, nt = 2;
  nn::MMoE<double> mmoe(ps, "m", {din, ne, eh, eh, nt, th});
  std::mt19937_64 rng(5);
  grf::test_support::randomize(ps, rng);
  nn::MatrixD x = random_matrix(rng, 1, din);
  auto P = [&](const std::string& n) -> const nn::MatrixD& { return ps.find("m." + n)->value; };
  auto affine = [&](const std::vector<double>& in, const std::string& n, bool relu_out) {
    const auto& w = P(n + ".w");
    const auto& b = P(n + ".b");
    std::vector<double> out(std::size_t(w.cols()));
    for (int j = 0; j < w.cols(); ++j) {
      double acc = b(0, j);
      for (int i = 0; i < w.rows(); ++i) acc += in[i] * w(i, j);
      out[j] = relu_out ? std::max(acc, 0.0) : acc;
    }
    return out;
  };
  std::vector<double> xin = {x(0, 0), x(0, 1), x(0, 2)};
  std::vector<std::vector<double>> experts;
  for (int e = 0; e < ne; ++e) {
    const std::string p = "expert" + std::to_string(e);
    experts.push_back(affine(affine(xin, p + ".l1", true), p + ".l2", true));
  }
  const auto logits = mmoe.forward(x);
  for (int t = 0; t < nt; ++t) {
    const std::string p = "task" + std::to_string(t);
    auto g = affine(xin, p + ".gate", false);
    const double mx = std::max(g[0], g[1]);
    double z = 0;
    for (auto& v : g) z += (v = std::exp(v - mx));
    std::vector<double> mixed(eh, 0.0);
    for (int e = 0; e < ne; ++e)
      for (int k = 0; k < eh; ++k) mixed[k] += g[e] / z * experts[e][k];
    const double ref = affine(affine(mixed, p + ".tower1", true), p + ".tower2", false)[0];
    EXPECT_NEAR(logits(0, t), ref, 1e-5);
  }
}

TEST(RankScore, Examples) {
  EXPECT_DOUBLE_EQ(rank_score({0.3, 0.8, 0.1, 0.2}, {1, 0, 0, 0}), 0.3);
  EXPECT_DOUBLE_EQ(rank_score({0.5, 0.5, 0.5, 0.5}, {1, 1, -1, 1}), 1.0);
}

TEST(RankScore, ArgmaxInvariantUnderPositiveScaling) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PxtrVector> ps(6);
    for (auto& p : ps) p = {u(rng), u(rng), u(rng), u(rng)};
    std::array<double, 4> w{u(rng), u(rng), -u(rng), u(rng)}, w2 = w;
    const double k = 0.1 + 10 * u(rng);
    for (auto& v : w2) v *= k;
    auto argmax = [&](const std::array<double, 4>& ww) {
      return std::max_element(ps.begin(), ps.end(), [&](auto& a, auto& b) { return rank_score(a, ww) < rank_score(b, ww); }) - ps.begin();
    };
    EXPECT_EQ(argmax(w), argmax(w2));
  }
}

TEST(SelectBest, SingletonDominanceAndEmpty) {
  RankModel model(RankConfig{}, FeatureSchema{}, 1);
  CachedVideo a = golden_candidate();
  EXPECT_EQ(select_best({&a}, golden_session(), golden_device(), {}, model), std::optional<std::size_t>(0));
  EXPECT_EQ(select_best({}, golden_session(), golden_device(), {}, model), std::nullopt);

  CachedVideo b = a;
  b.meta.id = 2;
  const std::array<double, 4> w{1, 1, -1, 1};
  const std::vector<double> scores = {rank_score({1, 1, 0, 1}, w), rank_score({0, 0, 1, 0}, w)};
  EXPECT_EQ(select_best_by_score({&a, &b}, scores), std::optional<std::size_t>(0));
}

TEST(SelectBest, TieBreaksByRecencyThenId) {
  CachedVideo a = golden_candidate(), b = a, c = a;
  a.meta.id = 5;
  b.meta.id = 3;
  c.meta.id = 9;
  a.cached_at = b.cached_at = 10.0;
  c.cached_at = 5.0;
  EXPECT_EQ(*select_best_by_score({&a, &b, &c}, {0.5, 0.5, 0.5}), 1u);
  c.cached_at = 11.0;
  EXPECT_EQ(*select_best_by_score({&a, &b, &c}, {0.5, 0.5, 0.5}), 2u);
}

TEST(SelectBest, MatchesExhaustiveOracleAndIsPermutationInvariant) {
  FeatureSchema schema;
  RankModel model(RankConfig{}, schema, 7);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    SessionState s = random_session(rng);
    std::vector<CachedVideo> pool(5);
    for (int i = 0; i < 5; ++i) {
      pool[i].meta = make_video(50 + i, 5 + 100 * u(rng), 300 + 4000 * u(rng), i % 3, {u(rng), u(rng), u(rng), u(rng)});
      pool[i].cached_ratio = 1.0;
      pool[i].cached_duration_s = pool[i].meta.duration_s;
      pool[i].cached_at = double(i);
    }
    std::vector<const CachedVideo*> cands;
    for (auto& c : pool) cands.push_back(&c);
    const std::vector<VideoMeta> rest = {make_video(99, 20, 1000, 1)};
    const auto chosen = select_best(cands, s, golden_device(), rest, model);
    // Oracle: score every candidate independently through the batch path.
    double best = -1e9;
    VideoId best_id = -1;
    for (const auto& c : pool) {
      const double sc = rank_score(model.predict(features::build_rank_features(s, golden_device(), c, rest, schema)),
                                   model.config().score_weights);
      if (sc > best + 1e-6) {
        best = sc;
        best_id = c.meta.id;
      }
    }
    ASSERT_TRUE(chosen);
    EXPECT_EQ(cands[*chosen]->meta.id, best_id);
    std::reverse(cands.begin(), cands.end());
    EXPECT_EQ(cands[*select_best(cands, s, golden_device(), rest, model)]->meta.id, best_id);
  }
}

TEST(RankModel, SharedPathMatchesBatchPath) {
  FeatureSchema schema;
  RankModel model(RankConfig{}, schema, 9);
  SessionState s = golden_session();
  std::vector<VideoMeta> rest;
  for (const auto& u : s.upcoming) rest.push_back(u.video);
  CachedVideo a = golden_candidate(), b = a;
  b.meta = make_video(77, 60, 2500, 2, {0.9, 0.7, 0.05, 0.4});
  const auto shared = model.predict_candidates(s, golden_device(), {&a, &b}, rest);
  const auto pa = model.predict(features::build_rank_features(s, golden_device(), a, rest, schema));
  const auto pb = model.predict(features::build_rank_features(s, golden_device(), b, rest, schema));
  for (int t = 0; t < 4; ++t) {
    EXPECT_NEAR(shared[0][t], pa[t], 1e-5);
    EXPECT_NEAR(shared[1][t], pb[t], 1e-5);
  }
}

TEST(RankNet, FullBackwardMatchesFiniteDifferences) {
  const auto schema = tiny_schema();
  std::mt19937_64 rng(10);
  std::vector<RankSample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(random_sample(rng, schema));
  samples[0].features.watched_seq.mask = {1, 1, 0};
  samples[1].features.upcoming_seq.mask = {0, 0};
  std::vector<const RankFeatureBundle*> batch;
  for (auto& s : samples) batch.push_back(&s.features);
  nn::MatrixD labels(3, 4);
  labels << 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0;

  nn::ParameterSet<double> ps;
  RankNet<double> net(ps, tiny_config(), schema);
  nn::initialize(ps, rng);
  grf::test_support::randomize(ps, rng, 0.5);
  auto loss = [&] { return nn::weighted_bce_with_logits(net.logits(batch), labels, nn::MatrixD()).loss; };
  auto res = grf::test_support::check_gradients(ps, loss, [&] {
    ps.zero_grad();
    RankNet<double>::Cache c;
    auto z = net.logits(batch, &c);
    net.backward(c, nn::weighted_bce_with_logits(z, labels, nn::MatrixD()).dlogits);
  });
  EXPECT_LT(res.worst_rel_error, 1e-4) << res.worst_param;
}

TEST(RankModel, OutputsInUnitIntervalAndBudgets) {
  FeatureSchema schema;
  RankModel model(RankConfig{}, schema, 11);
  EXPECT_LT(model.parameter_count(), 2000000u);
  std::mt19937_64 rng(12);
  auto s = random_sample(rng, schema);
  for (int i = 0; i < 10; ++i) {
    const auto p = model.predict(random_sample(rng, schema).features);
    for (int t = 0; t < 4; ++t) {
      EXPECT_GT(p[t], 0.0);
      EXPECT_LT(p[t], 1.0);
    }
  }
  model.predict(s.features);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 10; ++i) model.predict(s.features);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 10;
  EXPECT_LT(ms, 69.7);
}

TEST(RankTrain, AllZeroLabelsDrivePxtrsDown) {
  FeatureSchema schema;
  std::mt19937_64 rng(13);
  std::vector<RankSample> stream;
  for (int i = 0; i < 500; ++i) {
    stream.push_back(random_sample(rng, schema));
    stream.back().labels = EngagementLabels{};
  }
  RankConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 1;
  auto res = rank_train_stream(stream, cfg, schema, 1);
  EXPECT_EQ(res.model.step, 500);
  for (int i = 0; i < 10; ++i) {
    const auto p = res.model.predict(random_sample(rng, schema).features);
    for (int t = 0; t < 4; ++t) EXPECT_LT(p[t], 0.1);
  }
}

TEST(RankTrain, CheckpointCadenceAndSkippedLabels) {
  FeatureSchema schema = tiny_schema();
  std::mt19937_64 rng(14);
  std::vector<RankSample> stream;
  for (int i = 0; i < 352; ++i) stream.push_back(random_sample(rng, schema));
  stream[10].labels.reset();
  stream[200].labels.reset();
  RankConfig cfg = tiny_config();
  cfg.batch_size = 1;
  cfg.checkpoint_interval_steps = 100;
  std::vector<std::int64_t> steps;
  auto res = rank_train_stream(stream, cfg, schema, 2, [&](const RankModel& m) { steps.push_back(m.step); });
  EXPECT_EQ(res.skipped_missing_labels, 2);
  EXPECT_EQ(res.model.step, 350);
  EXPECT_EQ(res.checkpoints_emitted, 3);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{100, 200, 300}));
}

TEST(RankTrain, DeterministicForSeed) {
  FeatureSchema schema = tiny_schema();
  std::mt19937_64 rng(15);
  std::vector<RankSample> stream;
  for (int i = 0; i < 64; ++i) stream.push_back(random_sample(rng, schema));
  RankConfig cfg = tiny_config();
  cfg.batch_size = 8;
  auto a = rank_train_stream(stream, cfg, schema, 3);
  auto b = rank_train_stream(stream, cfg, schema, 3);
  for (std::size_t i = 0; i < a.model.params().size(); ++i)
    EXPECT_TRUE(a.model.params()[i].value == b.model.params()[i].value);
  EXPECT_EQ(a.step_losses, b.step_losses);
}
