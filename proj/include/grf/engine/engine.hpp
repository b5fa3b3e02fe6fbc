#pragma once

#include "grf/cache/cache_pool.hpp"
#include "grf/features/featurize.hpp"
#include "grf/gate/gate_model.hpp"
#include "grf/rank/rank_model.hpp"
#include "grf/sim/simulator.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace grf::engine {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// base never replaces; gate replaces using server pxtrs to pick the
/// candidate; full replaces using the ranking model.
enum class Arm { base, gate, full };
inline constexpr Arm kArms[] = {Arm::base, Arm::gate, Arm::full};
const char* to_string(Arm a);
Arm arm_from_string(const std::string& s);

enum class DecisionSource { server_list, cache_replacement, offline_cache };
const char* to_string(DecisionSource s);

struct DisplayDecision {
  VideoMeta shown;
  CacheView shown_cache;
  std::optional<VideoMeta> replaced;
  std::optional<double> gate_score;
  DecisionSource source = DecisionSource::server_list;
};

struct EngineConfig {
  double threshold = 0.75;
  Arm arm = Arm::full;
  bool reshow_replaced = true;          // false keeps replaced videos out of the pool
  double min_playable_cached_s = 5.0;   // partially cached candidates need this much buffered
  std::array<double, kTaskCount> score_weights{1.0, 1.0, -1.0, 1.0};

  void validate() const;
};

struct Models {
  const gate::GateModel* gate = nullptr;
  const rank::RankModel* rank = nullptr;
};

/// A cached entry may replace a choppy video only if it can start playing
/// without waiting on the network.
bool playable(const CachedVideo& c, const EngineConfig& cfg);

/// Pool entries that pass the playability filter, in pool order.
std::vector<const CachedVideo*> eligible_candidates(const cache::CachePool& pool, const EngineConfig& cfg);

/// Index of the candidate the arm would show. Arm full scores with the
/// ranking model; the other arms use the weighted sum of server pxtrs.
std::optional<std::size_t> choose_candidate(const std::vector<const CachedVideo*>& candidates,
                                            const SessionState& session, const DeviceState& device,
                                            const Models& models, const EngineConfig& cfg);

/// Online decision for the next upcoming video. Returns nullopt when the
/// upcoming list is empty, which tells the caller to fetch another page.
std::optional<DisplayDecision> on_scroll(SessionState& session, const DeviceState& device, cache::CachePool& pool,
                                         const Models& models, const EngineConfig& cfg,
                                         const features::FeatureSchema& schema, Timestamp now);

/// Offline decision: ranking only, over the whole pool. Returns nullopt when
/// the pool is empty, which ends the session.
std::optional<DisplayDecision> offline_step(SessionState& session, const DeviceState& device, cache::CachePool& pool,
                                            const Models& models, const EngineConfig& cfg, Timestamp now);

struct SampleLog {
  std::vector<gate::GateSample> gate;
  std::vector<rank::RankSample> rank;
};

/// Folds one played impression into the session state and, when `log` is
/// given, emits the gate and rank training samples built from the state the
/// decision was made in.
void record_outcome(SessionState& session, const DeviceState& device, const DisplayDecision& decision,
                    const sim::PlaybackOutcome& outcome, const features::FeatureSchema& schema,
                    SampleLog* log = nullptr, double bayes_logit = std::numeric_limits<double>::quiet_NaN(),
                    Timestamp now = 0.0);

struct ImpressionRecord {
  int step = 0;
  sim::Regime regime = sim::Regime::good;
  DecisionSource source = DecisionSource::server_list;
  VideoId shown = 0;
  VideoId replaced = 0;  // 0 when nothing was replaced
  double gate_score = std::numeric_limits<double>::quiet_NaN();
  sim::Verdict verdict = sim::Verdict::ok;
  double watch_time_s = 0.0;
  bool choppy = false;
};

struct SessionReport {
  UserId user = 0;
  Arm arm = Arm::base;
  std::vector<ImpressionRecord> impressions;
  double watch_time_s = 0.0;
  double watch_time_poor_s = 0.0;  // on weak or offline trace steps
  int choppy_count = 0;
  int replacements = 0;
  bool abandoned = false;
  std::uint64_t trace_checksum = 0;

  double choppy_rate() const {
    return impressions.empty() ? 0.0 : double(choppy_count) / double(impressions.size());
  }
};

/// Everything a session needs from the simulated world for one seed.
struct World {
  const sim::SimConfig* config = nullptr;
  const sim::Catalog* catalog = nullptr;
  std::uint64_t seed = 0;
};

/// Plays one user's session under `cfg.arm`. Deterministic in (world, user,
/// arm); the random streams depend on the step and video, not on the arm.
SessionReport run_session(UserId user, const World& world, const Models& models, const EngineConfig& cfg,
                          const features::FeatureSchema& schema, SampleLog* log = nullptr);

}  // namespace grf::engine
