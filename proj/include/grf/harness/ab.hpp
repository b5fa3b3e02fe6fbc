#pragma once

#include "grf/engine/engine.hpp"
#include "grf/harness/config.hpp"
#include "grf/harness/pipeline.hpp"
#include "grf/harness/stats.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace grf::harness {

enum Metric { kWatchTime, kWatchTimePoor, kChoppyRate, kReplacements, kRetentionProxy, kMetricCount };
inline constexpr const char* kMetricNames[kMetricCount] = {"WT", "WTP", "choppy_rate", "replacements",
                                                           "retention_proxy"};
inline constexpr int kArmCount = 3;

/// Per-seed aggregates of one arm. WT, WTP and replacements are per-user
/// means; the choppy rate is pooled over impressions.
struct ArmMetrics {
  std::array<double, kMetricCount> values{};
  std::size_t impressions = 0;
  std::uint64_t trace_checksum = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::uint64_t catalog_checksum = 0;
  std::array<ArmMetrics, kArmCount> arms;
};

struct ArmSummary {
  std::array<double, kMetricCount> mean{};
  std::array<PairedTest, kMetricCount> vs_base{};
  std::array<double, kMetricCount> relative_delta{};  // mean delta over the base mean
};

struct AbReport {
  int users_per_seed = 0;
  double retention_a = 0.0;
  double retention_b = 0.0;
  std::vector<SeedResult> seeds;
  std::array<ArmSummary, kArmCount> arms;
  std::vector<CurveBucket> base_curve;  // watch time against choppy rate, base arm, all seeds

  std::string to_text() const;
  std::string to_records() const;
};

ArmMetrics summarize_arm(const std::vector<engine::SessionReport>& sessions, const AbConfig& cfg);

/// One seed: same catalog, users and traces for every arm. Throws
/// std::logic_error if the arms ever see different traces.
SeedResult run_ab_seed(const ExperimentConfig& cfg, const engine::Models& models, std::uint64_t seed,
                       std::vector<engine::SessionReport>* base_sessions = nullptr);

/// Seeds first_seed .. first_seed + n_seeds - 1, then paired tests of each
/// arm against base across seeds.
AbReport run_ab(const ExperimentConfig& cfg, const engine::Models& models, int n_seeds);

/// report.txt, report.records and curves/*.csv under `dir`.
void write_ab_outputs(const AbReport& report, const std::string& dir);

}  // namespace grf::harness
