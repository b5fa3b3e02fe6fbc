#include "grf/gate/gate_model.hpp"
#include "grf/gate/metrics.hpp"
#include "grf/nn/init.hpp"
#include "support/fixtures.hpp"
#include "support/layer_gradient_suite.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

using namespace grf;
using namespace grf::gate;
using features::FeatureSchema;
using grf::test_support::make_video;

namespace {

/// Brute-force pairwise AUC used as the reference for the sort-based one.
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] && !y[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

/// Random but well-formed features; when `choppy` is set the cache is thin and
/// the network weak, which makes the label learnable from static codes.
GateSample random_sample(std::mt19937_64& rng, const FeatureSchema& schema, bool choppy) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SessionState s;
  const int n_dyn = int(u(rng) * 25), n_ch = int(u(rng) * 6);
  for (int i = 0; i < n_dyn; ++i) s.push_dynamic({u(rng) * 8000.0, u(rng), u(rng)});
  for (int i = 0; i < n_ch; ++i) s.push_choppy({500 + u(rng) * 5000, 5 + u(rng) * 100, int(u(rng) * 3), u(rng), u(rng) * 2000});
  DeviceState d{u(rng), u(rng), choppy ? 50.0 + u(rng) * 200.0 : 3000.0 + u(rng) * 8000.0, true};
  const CacheView view{choppy ? 0.05 + 0.2 * u(rng) : 0.6 + 0.4 * u(rng), 0.0};
  VideoMeta v = make_video(1, 5 + u(rng) * 100, 300 + u(rng) * 4000, int(u(rng) * 3));
  GateSample out;
  out.features = features::build_gate_features(s, d, v, {view.cached_ratio, view.cached_ratio * v.duration_s}, schema);
  out.label = choppy;
  return out;
}

FeatureSchema tiny_schema() {
  FeatureSchema s;
  s.n_bins = 4;
  s.embed_dim = 2;
  s.soft_meta = 2;
  s.dynamic_len = 3;
  s.choppy_len = 2;
  return s;
}

GateConfig tiny_config() {
  GateConfig c;
  c.n_mask_blocks = 2;
  c.mask_hidden = 3;
  c.mask_gen_hidden = 4;
  c.attn_dim = 2;
  return c;
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc({0.9, 0.1}, {true, false}), 1.0);
  EXPECT_DOUBLE_EQ(auc({0.8, 0.6, 0.4, 0.2}, {true, false, true, false}), 0.75);
  EXPECT_DOUBLE_EQ(auc({0.3, 0.3, 0.3}, {true, false, true}), 0.5);
  EXPECT_THROW(auc({0.1, 0.2}, {true, true}), MetricError);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    std::vector<bool> y;
    for (int i = 0; i < 30; ++i) {
      s.push_back(level(rng) / 6.0);
      y.push_back(level(rng) % 2 == 0);
    }
    y[0] = true;
    y[1] = false;
    EXPECT_NEAR(auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n;
  std::vector<double> s, t;
  std::vector<bool> y;
  for (int i = 0; i < 200; ++i) {
    const double v = n(rng);
    s.push_back(v);
    t.push_back(std::exp(3.0 * v) + 7.0);
    y.push_back(n(rng) + v > 0.0);
  }
  EXPECT_DOUBLE_EQ(auc(s, y), auc(t, y));
}

TEST(RecallAtPrecision, Examples) {
  EXPECT_DOUBLE_EQ(recall_at_precision({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_precision({0.9, 0.8, 0.7}, {true, false, true}, 0.7), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_precision({0.9, 0.8, 0.2, 0.1}, {false, false, true, true}, 0.7), 0.0);
  EXPECT_THROW(recall_at_precision({0.9}, {false}), MetricError);
}

TEST(RecallAtPrecision, NonIncreasingInTarget) {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> n;
  std::vector<double> s;
  std::vector<bool> y;
  for (int i = 0; i < 300; ++i) {
    const bool label = n(rng) > 0.8;
    y.push_back(label);
    s.push_back(n(rng) + (label ? 1.5 : 0.0));
  }
  double prev = 1.0;
  for (double p = 0.05; p <= 1.0; p += 0.05) {
    const double r = recall_at_precision(s, y, p);
    EXPECT_LE(r, prev + 1e-12);
    prev = r;
  }
}

TEST(MaskBlock, ZeroInputIsFinite) {
  nn::ParameterSet<double> ps;
  nn::MaskBlock<double> block(ps, "mb", 5, 4, 3);
  std::mt19937_64 rng(1);
  nn::initialize(ps, rng);
  const auto y = block.forward(nn::MatrixD::Zero(2, 5));
  EXPECT_TRUE(y.allFinite());
}

TEST(MaskBlock, AllOnesMaskReducesToProjection) {
  nn::ParameterSet<double> ps;
  nn::MaskBlock<double> block(ps, "mb", 4, 3, 5);
  std::mt19937_64 rng(2);
  nn::initialize(ps, rng);
  block.mask_gen2().weight().value.setZero();
  block.mask_gen2().bias()->value.setOnes();
  nn::MatrixD v = grf::test_support::random_matrix(rng, 3, 4);
  nn::MatrixD reference = nn::relu(nn::MatrixD(v * block.projection().weight().value * block.output().weight().value));
  nn::ParameterSet<double> ln_params;
  nn::LayerNorm<double> ln(ln_params, "ref", 5);
  EXPECT_LT((block.forward(v) - ln.forward(reference)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MaskBlock, MatchesScalarReference) {
  nn::ParameterSet<double> ps;
  const int d = 4, h = 3, o = 2;
  nn::MaskBlock<double> block(ps, "mb", d, h, o);
  std::mt19937_64 rng(3);
  grf::test_support::randomize(ps, rng);
  std::vector<double> v(d);
  for (auto& x : v) x = std::normal_distribution<double>()(rng);
  auto P = [&](const char* n) -> const nn::MatrixD& { return ps.find(std::string("mb.") + n)->value; };
  std::vector<double> hid(h), mask(d), proj(d), pre(o);
  for (int j = 0; j < h; ++j) {
    double acc = P("mask1.b")(0, j);
    for (int i = 0; i < d; ++i) acc += v[i] * P("mask1.w")(i, j);
    hid[j] = std::max(acc, 0.0);
  }
  for (int j = 0; j < d; ++j) {
    double m = P("mask2.b")(0, j), p = 0.0;
    for (int i = 0; i < h; ++i) m += hid[i] * P("mask2.w")(i, j);
    for (int i = 0; i < d; ++i) p += v[i] * P("proj.w")(i, j);
    mask[j] = m;
    proj[j] = p;
  }
  for (int j = 0; j < o; ++j) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += mask[i] * proj[i] * P("out.w")(i, j);
    pre[j] = std::max(acc, 0.0);
  }
  double mean = 0.0, var = 0.0;
  for (double x : pre) mean += x / o;
  for (double x : pre) var += (x - mean) * (x - mean) / o;
  nn::MatrixD in(1, d);
  for (int i = 0; i < d; ++i) in(0, i) = v[i];
  const auto y = block.forward(in);
  for (int j = 0; j < o; ++j) {
    const double ref = (pre[j] - mean) / std::sqrt(var + 1e-5) * P("ln.gain")(0, j) + P("ln.shift")(0, j);
    EXPECT_NEAR(y(0, j), ref, 1e-5);
  }
}

TEST(HierarchicalAttention, EmptySequencesGiveZero) {
  nn::ParameterSet<double> ps;
  HierarchicalAttention<double> att(ps, "h", 3, 2, 2, 1, 4);
  std::mt19937_64 rng(4);
  grf::test_support::randomize(ps, rng);
  nn::Mask dm = nn::Mask::Zero(1, 3), cm = nn::Mask::Zero(1, 2);
  const auto out = att.forward(grf::test_support::random_matrix(rng, 1, 3), grf::test_support::random_matrix(rng, 3, 2),
                               dm, grf::test_support::random_matrix(rng, 2, 2), cm);
  EXPECT_EQ(out.cols(), 8);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(HierarchicalAttention, SingletonAndHandSetWeights) {
  nn::ParameterSet<double> ps;
  HierarchicalAttention<double> att(ps, "h", 2, 2, 2, 1, 2);
  std::mt19937_64 rng(5);
  grf::test_support::randomize(ps, rng);
  auto& first = att.first();
  first.value_proj().weight().value.setIdentity();
  nn::MatrixD target(1, 2), seq(2, 2), choppy = nn::MatrixD::Zero(2, 2);
  seq << 1.0, 2.0, 5.0, -1.0;
  nn::Mask cm = nn::Mask::Zero(1, 2);

  nn::Mask one(1, 2);
  one << 1, 0;
  target << 0.3, -0.7;
  auto out = att.forward(target, seq, one, choppy, cm);
  EXPECT_NEAR(out(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(out(0, 1), 2.0, 1e-12);

  // Identity projections and keys chosen so the scaled logits are (ln 3, 0).
  first.query_proj().weight().value.setIdentity();
  first.key_proj().weight().value.setIdentity();
  const double k = std::log(3.0) * std::sqrt(2.0);
  seq << k, 0.0, 0.0, 0.0;
  target << 1.0, 0.0;
  nn::Mask both(1, 2);
  both << 1, 1;
  out = att.forward(target, seq, both, choppy, cm);
  EXPECT_NEAR(out(0, 0), 0.75 * k, 1e-12);
  EXPECT_NEAR(out(0, 1), 0.0, 1e-12);
}

TEST(GateNet, FullBackwardMatchesFiniteDifferences) {
  const auto schema = tiny_schema();
  const auto cfg = tiny_config();
  std::mt19937_64 rng(6);
  std::vector<GateSample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(random_sample(rng, schema, i == 1));
  samples[0].features.dynamic_seq.mask = {1, 1, 0};
  samples[0].features.choppy_seq.mask = {1, 0};
  std::vector<const GateFeatureVector*> batch;
  for (auto& s : samples) batch.push_back(&s.features);
  nn::MatrixD labels(3, 1), weights(3, 1);
  labels << 0, 1, 0;
  weights << 1, 10, 1;

  nn::ParameterSet<double> ps;
  GateNet<double> net(ps, cfg, schema);
  nn::initialize(ps, rng);
  grf::test_support::randomize(ps, rng, 0.5);
  auto loss = [&] { return nn::weighted_bce_with_logits(net.logits(batch), labels, weights).loss; };
  auto res = grf::test_support::check_gradients(ps, loss, [&] {
    ps.zero_grad();
    GateNet<double>::Cache c;
    auto z = net.logits(batch, &c);
    net.backward(c, nn::weighted_bce_with_logits(z, labels, weights).dlogits);
  });
  EXPECT_LT(res.worst_rel_error, 1e-4) << res.worst_param;
}

TEST(GateModel, ZeroHeadGivesOneHalf) {
  FeatureSchema schema;
  GateModel model(GateConfig{}, schema, 7);
  model.net().head().weight().value.setZero();
  model.net().head().bias()->value.setZero();
  std::mt19937_64 rng(8);
  EXPECT_EQ(model.predict(random_sample(rng, schema, true).features), 0.5);
}

TEST(GateModel, OutputStrictlyInsideUnitInterval) {
  FeatureSchema schema;
  GateModel model(GateConfig{}, schema, 9);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    const double p = model.predict(random_sample(rng, schema, i % 2 == 0).features);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(GateModel, ThresholdDecision) {
  GateModel model(GateConfig{}, FeatureSchema{}, 1);
  EXPECT_TRUE(model.is_choppy(0.8201));
  EXPECT_FALSE(model.is_choppy(0.7499));
}

TEST(GateModel, RejectsOutOfVocabularyCodes) {
  FeatureSchema schema;
  GateModel model(GateConfig{}, schema, 11);
  std::mt19937_64 rng(12);
  auto s = random_sample(rng, schema, false);
  s.features.static_row.codes[0] = schema.n_bins;
  EXPECT_THROW(model.predict(s.features), features::FeatureError);
  s = random_sample(rng, schema, false);
  s.features.prior_bias.codes[1] = 3;
  EXPECT_THROW(model.predict(s.features), features::FeatureError);
}

TEST(GateModel, ParameterBudgetAndLatency) {
  GateModel model(GateConfig{}, FeatureSchema{}, 13);
  EXPECT_GT(model.parameter_count(), 10000u);
  EXPECT_LT(model.parameter_count(), 1000000u);
  std::mt19937_64 rng(14);
  auto s = random_sample(rng, model.schema(), true);
  model.predict(s.features);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) model.predict(s.features);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 20;
  EXPECT_LT(ms, 43.0);
}

TEST(GateTrain, RejectsSingleClass) {
  FeatureSchema schema;
  std::mt19937_64 rng(15);
  std::vector<GateSample> all_neg = {random_sample(rng, schema, false), random_sample(rng, schema, false)};
  EXPECT_THROW(gate_train(all_neg, {}, GateConfig{}, schema, 1), ConfigError);
}

TEST(GateTrain, WeightedOptimumIsTenElevenths) {
  FeatureSchema schema;
  std::mt19937_64 rng(16);
  GateSample pos = random_sample(rng, schema, true);
  GateSample neg = pos;
  pos.label = true;
  neg.label = false;
  GateConfig cfg;
  cfg.lr.initial = 3e-3;
  cfg.lr.hold_steps = 10000;
  cfg.batch_size = 2;
  cfg.epochs = 600;
  auto res = gate_train({pos, neg}, {}, cfg, schema, 2);
  EXPECT_NEAR(res.model.predict(pos.features), 10.0 / 11.0, 5e-3);
}

TEST(GateTrain, SeparableToyReachesHighAuc) {
  FeatureSchema schema;
  std::mt19937_64 rng(18);
  std::vector<GateSample> data;
  for (int i = 0; i < 200; ++i) data.push_back(random_sample(rng, schema, i % 4 == 0));
  GateConfig cfg;
  cfg.lr.initial = 2e-3;
  cfg.lr.hold_steps = 1000;
  cfg.batch_size = 50;
  cfg.epochs = 50;
  cfg.max_steps = 200;
  auto res = gate_train(data, data, cfg, schema, 3);
  EXPECT_LE(res.model.step, 200);
  EXPECT_GE(res.log.epochs.back().val_auc, 0.99);
}

TEST(GateTrain, DeterministicForSeed) {
  FeatureSchema schema;
  std::mt19937_64 rng(19);
  std::vector<GateSample> data;
  for (int i = 0; i < 64; ++i) data.push_back(random_sample(rng, schema, i % 3 == 0));
  GateConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 2;
  auto a = gate_train(data, {}, cfg, schema, 5);
  auto b = gate_train(data, {}, cfg, schema, 5);
  ASSERT_EQ(a.model.params().size(), b.model.params().size());
  for (std::size_t i = 0; i < a.model.params().size(); ++i)
    EXPECT_TRUE(a.model.params()[i].value == b.model.params()[i].value) << a.model.params()[i].name;
  EXPECT_EQ(a.log.to_text(), b.log.to_text());
}

TEST(GateTrain, BatchOrderDoesNotChangeSummedLoss) {
  FeatureSchema schema;
  GateModel model(GateConfig{}, schema, 20);
  std::mt19937_64 rng(21);
  std::vector<GateSample> data;
  for (int i = 0; i < 40; ++i) data.push_back(random_sample(rng, schema, i % 5 == 0));
  std::vector<const GateSample*> order;
  for (auto& s : data) order.push_back(&s);
  const double base = gate_loss(model, order) * double(order.size());
  std::shuffle(order.begin(), order.end(), rng);
  EXPECT_NEAR(gate_loss(model, order) * double(order.size()), base, 1e-6 * std::max(1.0, std::abs(base)));
}
