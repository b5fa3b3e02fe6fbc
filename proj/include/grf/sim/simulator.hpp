#pragma once

#include "grf/features/types.hpp"
#include "grf/sim/random.hpp"
#include "grf/sim/sim_config.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <unordered_set>
#include <vector>

namespace grf::sim {

enum class Verdict { ok, stutter, slow_first_screen, failed_load };
const char* to_string(Verdict v);

struct PlaybackOutcome {
  Verdict verdict = Verdict::ok;
  double watch_time_s = 0.0;
  EngagementLabels labels;
  bool choppy = false;
};

/// Result of one playback draw. `logit` is the noise-free z; since the noise
/// is independent of every observable, ranking by it is Bayes-optimal.
struct PlaybackDraw {
  Verdict verdict = Verdict::ok;
  double logit = 0.0;
  double probability = 0.0;  // sigmoid(logit), before noise
};

struct Catalog {
  std::vector<VideoMeta> videos;  // videos[i].id == i + 1
  Eigen::MatrixXd factors;        // one latent row per video

  const VideoMeta& by_id(VideoId id) const { return videos.at(std::size_t(id - 1)); }
  std::uint64_t checksum() const;
};

struct UserProfile {
  UserId id = 0;
  Eigen::VectorXd taste;
  double bias = 0.0;
  double device_score = 0.5;
  double base_load = 0.0;
  std::vector<long> consumption_history;  // seven days, oldest first
};

struct NetworkTrace {
  std::vector<double> speed_kbps;
  std::vector<Regime> regime;

  std::size_t size() const { return speed_kbps.size(); }
  std::uint64_t checksum() const;
};

double sigmoid(double x);
double logit(double p);

Catalog gen_catalog(const SimConfig& cfg, std::uint64_t seed);
NetworkTrace gen_network_trace(const SimConfig& cfg, std::uint64_t seed, int length);
UserProfile gen_user(const SimConfig& cfg, std::uint64_t seed, UserId user);

/// Device condition of `user` at trace step `step`.
DeviceState device_at(const SimConfig& cfg, const UserProfile& user, const NetworkTrace& trace, int step,
                      std::uint64_t seed);

/// How much of `video` downloads in the prefetch window at `speed_kbps`.
CacheView prefetch(const SimConfig& cfg, const VideoMeta& video, double speed_kbps);

/// Mean engagement logit of `user` for catalog entry `index`.
double true_affinity(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, std::size_t index);

/// Probability of each engagement label for a video of `duration_s` when the
/// per-view logit is normal(mean_logit, sd) and playback is smooth.
PxtrVector label_probabilities(const EngagementConfig& cfg, double mean_logit, double sd, double duration_s);

/// Top `k` catalog entries for `user` by the server's noisy affinity estimate,
/// skipping `exclude`, each carrying user-specific server pxtrs.
std::vector<VideoMeta> server_rs_stub(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, int k,
                                      std::uint64_t seed, const std::unordered_set<VideoId>& exclude = {});

/// Pages through one user's server ranking; each video is served once.
class ServerSession {
 public:
  ServerSession(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, std::uint64_t seed);
  std::vector<VideoMeta> next(int k);
  bool exhausted() const { return cursor_ >= order_.size(); }

 private:
  const SimConfig* cfg_;
  const UserProfile* user_;
  const Catalog* catalog_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::vector<double> scores_;
  std::size_t cursor_ = 0;
};

PlaybackDraw playback_oracle(const VideoMeta& video, const DeviceState& device, const CacheView& cached,
                             const PlaybackConfig& cfg, KeyedRng& rng);

PlaybackOutcome engagement_oracle(double affinity, const VideoMeta& video, Verdict verdict,
                                  const EngagementConfig& cfg, KeyedRng& rng);

/// Labels implied by a watch time; shared by the oracle and its tests.
EngagementLabels labels_for(double watch_time_s, double duration_s, const EngagementConfig& cfg);

}  // namespace grf::sim
