#include "grf/harness/ab.hpp"
#include "grf/harness/checkpoint.hpp"
#include "grf/harness/config.hpp"
#include "grf/harness/pipeline.hpp"
#include "grf/harness/records.hpp"
#include "grf/harness/split.hpp"
#include "grf/harness/stats.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

using namespace grf;
using namespace grf::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c = default_config();
  c.sim.catalog_size = 300;
  c.ab.n_users = 4;
  return c;
}

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "grf_harness_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

gate::GateModel constant_gate(double p) {
  gate::GateModel m(gate::GateConfig{}, features::FeatureSchema{}, 3);
  m.net().head().weight().value.setZero();
  m.net().head().bias()->value.setConstant(float(std::log(p / (1.0 - p))));
  return m;
}

}  // namespace

TEST(Checkpoint, GateRoundTripPreservesPredictions) {
  gate::GateModel model(gate::GateConfig{}, features::FeatureSchema{}, 11);
  model.step = 321;
  const auto path = temp_path("gate.grfc");
  save_checkpoint(to_checkpoint(model), path);
  const auto loaded = gate_from_checkpoint(load_checkpoint(path, ModelKind::gate));
  EXPECT_EQ(loaded.step, 321);
  const auto log = generate_samples(tiny_config(), 2, 5);
  ASSERT_FALSE(log.gate.empty());
  for (const auto& s : log.gate) EXPECT_EQ(model.predict(s.features), loaded.predict(s.features));
}

TEST(Checkpoint, RankRoundTripPreservesPredictions) {
  rank::RankConfig cfg;
  cfg.n_experts = 3;
  rank::RankModel model(cfg, features::FeatureSchema{}, 12);
  model.step = 4;
  model.samples_seen = 512;
  const auto bytes = encode_checkpoint(to_checkpoint(model));
  const auto loaded = rank_from_checkpoint(decode_checkpoint(bytes));
  EXPECT_EQ(loaded.samples_seen, 512);
  EXPECT_EQ(loaded.config().n_experts, 3);
  const auto log = generate_samples(tiny_config(), 1, 5);
  for (const auto& s : log.rank) {
    const auto a = model.predict(s.features), b = loaded.predict(s.features);
    for (int t = 0; t < kTaskCount; ++t) EXPECT_EQ(a[t], b[t]);
  }
}

TEST(Checkpoint, CorruptionIsReportedByKind) {
  gate::GateModel model(gate::GateConfig{}, features::FeatureSchema{}, 1);
  const std::string good = encode_checkpoint(to_checkpoint(model));
  auto code_of = [](const std::string& bytes) {
    try {
      decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    return CheckpointError::Code::io;  // not thrown
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_EQ(code_of(bad), CheckpointError::Code::bad_magic);
  bad = good;
  bad[4] = char(9);  // version field, little-endian
  EXPECT_EQ(code_of(bad), CheckpointError::Code::version_mismatch);
  bad = good;
  bad[good.size() / 2] ^= 0x40;
  EXPECT_EQ(code_of(bad), CheckpointError::Code::crc_mismatch);
  EXPECT_EQ(code_of(good.substr(0, 10)), CheckpointError::Code::truncated);
  EXPECT_EQ(code_of(good.substr(0, good.size() - 7)), CheckpointError::Code::crc_mismatch);

  const auto path = temp_path("kind.grfc");
  save_checkpoint(to_checkpoint(model), path);
  try {
    load_checkpoint(path, ModelKind::rank);
    FAIL() << "loaded a gate checkpoint as a ranker";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointError::Code::kind_mismatch);
  }
  try {
    load_checkpoint(temp_path("does_not_exist.grfc"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointError::Code::io);
  }
}

TEST(Checkpoint, FrozenGateReproducesRecordedPrediction) {
  const std::string dir = std::string(GRF_TEST_DATA_DIR) + "/golden/";
  const Checkpoint frozen = load_checkpoint(dir + "gate_seed2024.grfc", ModelKind::gate);
  const auto model = gate_from_checkpoint(frozen);
  features::FeatureSchema schema;
  auto session = test_support::golden_session();
  const auto f = features::build_gate_features(session, test_support::golden_device(),
                                               test_support::golden_candidate().meta, {0.6, 16.5}, schema);
  std::ifstream in(dir + "gate_seed2024_p.txt");
  double recorded = 0.0;
  ASSERT_TRUE(in >> recorded) << "recorded prediction missing";
  EXPECT_NEAR(model.predict(f), recorded, 1e-6);

  // The same seed and shape must still initialize to the frozen weights.
  gate::GateConfig cfg;
  cfg.n_mask_blocks = 2;
  cfg.mask_hidden = 8;
  cfg.mask_gen_hidden = 8;
  cfg.attn_dim = 8;
  EXPECT_EQ(encode_checkpoint(to_checkpoint(gate::GateModel(cfg, schema, 2024))), encode_checkpoint(frozen));
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  gate::GateModel model(gate::GateConfig{}, features::FeatureSchema{}, 1);
  auto c = to_checkpoint(model);
  c.tensors.pop_back();
  EXPECT_THROW(gate_from_checkpoint(c), CheckpointError);
}

TEST(Config, IniRoundTrip) {
  const auto text = to_ini(default_config());
  EXPECT_EQ(to_ini(parse_config(text)), text);
}

TEST(Config, OverridesApplyOnTopOfDefaults) {
  const auto c = parse_config("[gate]\nthreshold = 0.6\n[sim]\ntrace_start = weak\nbeta0 = -6.5\n[engine]\narm = gate\n");
  EXPECT_EQ(c.gate.threshold, 0.6);
  EXPECT_EQ(c.sim.trace.start, sim::Regime::weak);
  EXPECT_EQ(c.sim.playback.beta[0], -6.5);
  EXPECT_EQ(c.engine.arm, engine::Arm::gate);
  EXPECT_EQ(c.rank.batch_size, default_config().rank.batch_size);
}

TEST(Config, ShippedDefaultsMatchBuiltIns) {
  const auto c = load_config(std::string(GRF_TEST_DATA_DIR) + "/../configs/default.ini");
  EXPECT_EQ(to_ini(c), to_ini(default_config()));
}

TEST(Config, UnknownOrInvalidEntriesAreErrors) {
  EXPECT_THROW(parse_config("[gate]\nthreshhold = 0.6\n"), ConfigError);
  EXPECT_THROW(parse_config("[gates]\nthreshold = 0.6\n"), ConfigError);
  EXPECT_THROW(parse_config("[gate]\nthreshold = high\n"), ConfigError);
  EXPECT_THROW(parse_config("[sim]\ntrace_p_good_to_good = 0.5\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("[ab]\nn_seeds = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("[sim]\ndata_split_train = 0.7\n"), std::invalid_argument);
  EXPECT_EQ(parse_config("[sim]\ndata_split_train = 0.6\ndata_split_valid = 0.2\ndata_split_test = 0.2\n").data.split(),
            (std::array<double, 3>{0.6, 0.2, 0.2}));
}

TEST(Records, GateRoundTrip) {
  const auto log = generate_samples(tiny_config(), 3, 9);
  std::stringstream io;
  write_gate_records(io, log.gate);
  const auto back = read_gate_records(io);
  ASSERT_EQ(back.size(), log.gate.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_TRUE(back[i].features == log.gate[i].features) << i;
    EXPECT_EQ(back[i].label, log.gate[i].label);
    EXPECT_EQ(back[i].bayes_logit, log.gate[i].bayes_logit);
  }
}

TEST(Records, RankRoundTrip) {
  auto log = generate_samples(tiny_config(), 2, 9);
  ASSERT_GE(log.rank.size(), 2u);
  log.rank[1].labels.reset();
  const auto path = temp_path("rank.jsonl");
  save_rank_records(path, log.rank);
  const auto back = load_rank_records(path);
  ASSERT_EQ(back.size(), log.rank.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_TRUE(back[i].features == log.rank[i].features) << i;
    EXPECT_EQ(back[i].labels.has_value(), log.rank[i].labels.has_value());
    EXPECT_EQ(back[i].event_time, log.rank[i].event_time);
    for (int t = 0; t < kTaskCount; ++t) EXPECT_EQ(back[i].server_pxtrs[t], log.rank[i].server_pxtrs[t]);
  }
}

TEST(Records, BadInputNamesTheLine) {
  std::stringstream io;
  write_gate_records(io, generate_samples(tiny_config(), 1, 9).gate);
  std::string text = io.str() + "{\"label\": true}\n";
  std::stringstream broken(text);
  try {
    read_gate_records(broken);
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
  std::stringstream wrong_kind;
  write_rank_records(wrong_kind, generate_samples(tiny_config(), 1, 9).rank);
  EXPECT_THROW(read_gate_records(wrong_kind), RecordError);
}

TEST(Split, SizesFollowRatios) {
  EXPECT_EQ(split_sizes(10, {0.8, 0.1, 0.1}), (std::array<std::size_t, 3>{8, 1, 1}));
  EXPECT_EQ(split_sizes(1000, {0.8, 0.1, 0.1}), (std::array<std::size_t, 3>{800, 100, 100}));
  const auto s = split_sizes(7, {0.8, 0.1, 0.1});
  EXPECT_EQ(s[0] + s[1] + s[2], 7u);
}

TEST(Split, PartitionsWithoutLossOrOverlap) {
  std::vector<int> items(997);
  std::iota(items.begin(), items.end(), 0);
  const auto parts = split_dataset(items, {0.8, 0.1, 0.1}, 42);
  std::multiset<int> all(parts.train.begin(), parts.train.end());
  all.insert(parts.valid.begin(), parts.valid.end());
  all.insert(parts.test.begin(), parts.test.end());
  EXPECT_EQ(all, std::multiset<int>(items.begin(), items.end()));
  EXPECT_TRUE(std::is_sorted(parts.train.begin(), parts.train.end()));
  const auto again = split_dataset(items, {0.8, 0.1, 0.1}, 42);
  EXPECT_EQ(again.test, parts.test);
  EXPECT_NE(split_dataset(items, {0.8, 0.1, 0.1}, 43).test, parts.test);
  EXPECT_THROW(split_dataset(std::vector<int>{}), std::invalid_argument);
}

TEST(Stats, PairedTTestMatchesReferenceValues) {
  auto r = paired_t_test({3, 5, 4, 8, 6}, {1, 2, 3, 4, 5});
  EXPECT_EQ(r.n, 5u);
  EXPECT_NEAR(r.mean_diff, 2.2, 1e-12);
  EXPECT_NEAR(r.t, 3.772968873135195, 1e-9);
  EXPECT_NEAR(r.p_value, 0.019554212720304595, 1e-9);
  r = paired_t_test({0.1, -0.4, 0.25, 0.3, -0.05, 0.2, 0.15}, std::vector<double>(7, 0.0));
  EXPECT_NEAR(r.t, 0.8678202770130579, 1e-9);
  EXPECT_NEAR(r.p_value, 0.41884406227014936, 1e-9);
}

TEST(Stats, DegenerateInputs) {
  const auto same = paired_t_test({1, 2, 3}, {1, 2, 3});
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  const auto shifted = paired_t_test({2, 3, 4}, {1, 2, 3});
  EXPECT_EQ(shifted.p_value, 0.0);
  EXPECT_THROW(paired_t_test({1, 2}, {1}), std::invalid_argument);
  EXPECT_THROW(paired_t_test({1}, {1}), std::invalid_argument);
}

TEST(Curve, BucketsByRoundedChoppyRate) {
  std::vector<engine::SessionReport> sessions(4);
  auto fill = [](engine::SessionReport& s, int n, int choppy, double wt) {
    s.impressions.resize(std::size_t(n));
    s.choppy_count = choppy;
    s.watch_time_s = wt;
  };
  fill(sessions[0], 20, 0, 100);
  fill(sessions[1], 20, 1, 80);   // 5%
  fill(sessions[2], 10, 1, 40);   // 10%
  fill(sessions[3], 2, 1, 5);     // 50%, above the cap
  const auto curve = watch_time_curve(sessions, 0.05, 0.25);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_NEAR(curve[1].choppy_rate, 0.05, 1e-12);
  EXPECT_EQ(curve[2].mean_watch_time_s, 40.0);
}

TEST(Ab, BaseArmIsItsOwnControlAndTracesArePaired) {
  auto cfg = tiny_config();
  const auto gate = constant_gate(0.9);
  const rank::RankModel ranker(rank::RankConfig{}, features::FeatureSchema{}, 2);
  const auto report = run_ab(cfg, {&gate, &ranker}, 2);
  ASSERT_EQ(report.seeds.size(), 2u);
  for (int m = 0; m < kMetricCount; ++m) {
    EXPECT_EQ(report.arms[0].vs_base[std::size_t(m)].mean_diff, 0.0);
    EXPECT_EQ(report.arms[0].vs_base[std::size_t(m)].p_value, 1.0);
  }
  for (const auto& s : report.seeds) {
    EXPECT_EQ(s.arms[1].trace_checksum, s.arms[0].trace_checksum);
    EXPECT_EQ(s.arms[2].trace_checksum, s.arms[0].trace_checksum);
    EXPECT_EQ(s.arms[0].values[kReplacements], 0.0);
  }
  EXPECT_NE(report.to_text().find("proxy"), std::string::npos);
  EXPECT_THROW(run_ab(cfg, {&gate, &ranker}, 1), ConfigError);
  EXPECT_THROW(run_ab(cfg, {&gate, nullptr}, 2), ConfigError);
}
