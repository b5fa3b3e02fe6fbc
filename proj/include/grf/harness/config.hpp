#pragma once

#include "grf/engine/engine.hpp"
#include "grf/features/schema.hpp"
#include "grf/gate/gate_config.hpp"
#include "grf/rank/rank_config.hpp"
#include "grf/sim/sim_config.hpp"

#include <array>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace grf::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Offline dataset generation; lives in the [sim] section.
struct DataConfig {
  int users = 2500;           // base-arm sessions logged by gen-data
  std::uint64_t seed = 1000;  // world seed for the training logs
  // Train, validation and test shares used by the training drivers.
  double split_train = 0.8;
  double split_valid = 0.1;
  double split_test = 0.1;

  std::array<double, 3> split() const { return {split_train, split_valid, split_test}; }
};

struct AbConfig {
  int n_users = 200;
  int n_seeds = 30;
  std::uint64_t first_seed = 1;
  // Retention proxy: sigmoid(a - b * session choppy rate), averaged over users.
  double retention_a = 2.0;
  double retention_b = 10.0;
  // Watch time versus choppy rate curve, and its calibration band.
  int curve_sessions = 10000;
  double curve_bucket_width = 0.05;
  double curve_max_rate = 0.25;
  double curve_min_drop_at_10 = 0.35;

  void validate() const;
};

struct ExperimentConfig {
  sim::SimConfig sim;
  DataConfig data;
  features::FeatureSchema features;
  gate::GateConfig gate;
  rank::RankConfig rank;
  engine::EngineConfig engine;
  AbConfig ab;

  /// Runs every section's own validation, rethrowing as ConfigError.
  void validate() const;
};

/// Defaults tuned for a desktop run of the whole pipeline.
ExperimentConfig default_config();

/// Parses INI text on top of `base`. Unknown sections or keys and
/// unparsable values are errors.
ExperimentConfig parse_config(const std::string& ini_text, const ExperimentConfig& base = default_config());
ExperimentConfig load_config(const std::string& path);

/// INI text for the given sections (all sections when the list is empty).
/// Numbers are written in shortest round-trip form, so parsing the text back
/// reproduces the configuration exactly.
std::string to_ini(const ExperimentConfig& cfg, std::initializer_list<const char*> sections = {});

}  // namespace grf::harness
