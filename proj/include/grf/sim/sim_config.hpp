#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace grf::sim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Regime : int { good = 0, weak = 1, offline = 2 };
inline constexpr int kRegimeCount = 3;
inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::good: return "good";
    case Regime::weak: return "weak";
    default: return "offline";
  }
}

struct RegimeParams {
  double mean_kbps = 0.0;
  double volatility_kbps = 0.0;
};

// Online regimes never drop below this fraction of their mean, so only the
// offline regime produces a zero speed.
inline constexpr double kOnlineSpeedFloor = 0.05;

struct TraceConfig {
  std::array<RegimeParams, kRegimeCount> regimes{{{6000.0, 2000.0}, {1000.0, 400.0}, {0.0, 0.0}}};
  // transition[from][to]; each row sums to one.
  std::array<std::array<double, kRegimeCount>, kRegimeCount> transition{{
      {0.965, 0.03, 0.005},
      {0.25, 0.70, 0.05},
      {0.30, 0.30, 0.40},
  }};
  Regime start = Regime::good;
};

/// Logistic choppiness model: z = b0 + b1*deficit + b2*load + b3*(1-ratio) + b4*tier.
struct PlaybackConfig {
  std::array<double, 5> beta{-7.0, 2.5, 1.0, 2.0, 0.5};
  double noise_sigma = 0.5;
  double speed_epsilon_kbps = 1.0;
  double hard_floor_kbps = 100.0;  // below this a barely started download fails
  double min_start_ratio = 0.1;
  double first_screen_s = 1.5;     // buffered seconds needed for a prompt first frame
};

struct EngagementConfig {
  int latent_dim = 8;
  double affinity_scale = 1.5;
  double quality_weight = 0.5;
  double user_bias_sd = 1.0;
  double affinity_offset = 0.5;
  double watch_noise_sd = 1.0;
  double choppy_penalty = 0.35;  // watch-time multiplier for stutter and slow start
  double t_effective_s = 7.0;
  double t_long_s = 18.0;
  double t_short_s = 3.0;
  double t_finish = 0.97;        // fraction of the duration
};

/// The server's view of a user misses the user's bias and adds noise to the
/// rest of the affinity, so its pxtrs are informative but imperfect.
struct ServerConfig {
  double rank_noise_sd = 1.0;
  double pxtr_noise_sd = 2.0;
};

struct DeviceConfig {
  double score_lo = 0.2;
  double score_hi = 1.0;
  double load_lo = 0.0;
  double load_hi = 0.7;
  double load_jitter_sd = 0.1;
};

struct SessionConfig {
  int length = 60;                  // impressions at most, one per trace step
  double step_seconds = 30.0;
  double prefetch_window_s = 6.0;   // download time the next video gets before it plays
  double abandon_after_choppy = 0.3;
  int page_size = 10;
  long history_lo = 15;             // daily cache consumption before the session, uniform range
  long history_hi = 40;
};

struct SimConfig {
  int catalog_size = 2000;
  int n_users = 100;
  double high_bitrate_share = 0.15;
  double size_tier_small_bytes = 3.0e6;
  double size_tier_large_bytes = 12.0e6;
  TraceConfig trace;
  PlaybackConfig playback;
  EngagementConfig engagement;
  ServerConfig server;
  DeviceConfig device;
  SessionConfig session;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending setting.
  void validate() const;
};

}  // namespace grf::sim
