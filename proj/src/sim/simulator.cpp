#include "grf/sim/simulator.hpp"

#include "grf/features/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

namespace grf::sim {

namespace {

std::uint64_t bits_of(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("sim: ") + what);
}

double normal(KeyedRng& rng, double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0; }
double uniform(KeyedRng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// P(sigmoid(X) >= r) for X ~ normal(mean, sd).
double prob_fraction_at_least(double r, double mean, double sd) {
  if (r <= 0.0) return 1.0;
  if (r >= 1.0) return 0.0;
  const double margin = mean - logit(r);
  if (sd <= 0.0) return margin >= 0.0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-margin / (sd * std::sqrt(2.0)));
}

}  // namespace

void SimConfig::validate() const {
  require(catalog_size >= 1, "catalog_size must be at least 1");
  require(n_users >= 1, "n_users must be at least 1");
  require(high_bitrate_share >= 0.0 && high_bitrate_share <= 1.0, "high_bitrate_share must lie in [0,1]");
  require(size_tier_small_bytes > 0.0 && size_tier_small_bytes < size_tier_large_bytes, "size tier thresholds");
  for (const auto& row : trace.transition) {
    double sum = 0.0;
    for (double p : row) {
      require(p >= 0.0 && p <= 1.0, "transition probabilities must lie in [0,1]");
      sum += p;
    }
    require(std::abs(sum - 1.0) < 1e-9, "transition rows must sum to 1");
  }
  for (const auto& r : trace.regimes) require(r.mean_kbps >= 0.0 && r.volatility_kbps >= 0.0, "regime parameters");
  require(playback.noise_sigma >= 0.0, "playback noise must be non-negative");
  require(playback.speed_epsilon_kbps > 0.0, "speed epsilon must be positive");
  require(playback.first_screen_s > 0.0, "first_screen_s must be positive");
  const auto& e = engagement;
  require(e.latent_dim >= 1, "latent_dim must be positive");
  require(e.t_effective_s > 0.0 && e.t_long_s > 0.0 && e.t_short_s > 0.0, "thresholds must be positive");
  require(e.t_finish > 0.0 && e.t_finish <= 1.0, "t_finish must lie in (0,1]");
  require(e.choppy_penalty >= 0.0 && e.choppy_penalty <= 1.0, "choppy_penalty must lie in [0,1]");
  require(e.watch_noise_sd >= 0.0 && e.user_bias_sd >= 0.0, "noise scales must be non-negative");
  require(server.rank_noise_sd >= 0.0 && server.pxtr_noise_sd >= 0.0, "server noise must be non-negative");
  require(device.score_lo <= device.score_hi && device.load_lo <= device.load_hi, "device ranges");
  require(session.length >= 1 && session.page_size >= 1, "session length and page size must be positive");
  require(session.abandon_after_choppy >= 0.0 && session.abandon_after_choppy <= 1.0,
          "abandon_after_choppy must lie in [0,1]");
  require(session.prefetch_window_s >= 0.0 && session.step_seconds > 0.0, "session timing");
  require(session.history_lo >= 0 && session.history_lo <= session.history_hi, "history range");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ok: return "ok";
    case Verdict::stutter: return "stutter";
    case Verdict::slow_first_screen: return "slow_first_screen";
    default: return "failed_load";
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::uint64_t Catalog::checksum() const {
  std::uint64_t h = videos.size();
  for (const auto& v : videos) {
    h = mix64(h ^ std::uint64_t(v.id));
    h = mix64(h ^ bits_of(v.duration_s));
    h = mix64(h ^ bits_of(v.bitrate_kbps));
    h = mix64(h ^ bits_of(v.latent_quality));
  }
  for (Eigen::Index i = 0; i < factors.size(); ++i) h = mix64(h ^ bits_of(factors.data()[i]));
  return h;
}

std::uint64_t NetworkTrace::checksum() const {
  std::uint64_t h = speed_kbps.size();
  for (std::size_t i = 0; i < speed_kbps.size(); ++i)
    h = mix64(h ^ bits_of(speed_kbps[i]) ^ (std::uint64_t(regime[i]) << 1));
  return h;
}

Catalog gen_catalog(const SimConfig& cfg, std::uint64_t seed) {
  require(cfg.catalog_size >= 1, "catalog_size must be at least 1");
  KeyedRng rng{seed, tag(Tag::catalog)};
  const int d = cfg.engagement.latent_dim;
  Catalog c;
  c.videos.reserve(std::size_t(cfg.catalog_size));
  c.factors.resize(cfg.catalog_size, d);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int i = 0; i < cfg.catalog_size; ++i) {
    VideoMeta v;
    v.id = i + 1;
    v.duration_s = std::exp(std::log(5.0) + uniform(rng) * (std::log(120.0) - std::log(5.0)));
    if (uniform(rng) < cfg.high_bitrate_share) {
      v.bitrate_kbps = 3000.0 + uniform(rng) * 5000.0;
    } else {
      v.bitrate_kbps = std::clamp(1200.0 * std::exp(0.4 * std_normal(rng)), 300.0, 3000.0);
    }
    v.size_bytes = std::int64_t(std::llround(v.bitrate_kbps * v.duration_s / 8.0 * 1000.0));
    v.size_tier = features::size_tier(v.size_bytes, std::int64_t(cfg.size_tier_small_bytes),
                                      std::int64_t(cfg.size_tier_large_bytes));
    v.latent_quality = std_normal(rng);
    for (int k = 0; k < d; ++k) c.factors(i, k) = std_normal(rng);
    c.videos.push_back(v);
  }
  return c;
}

NetworkTrace gen_network_trace(const SimConfig& cfg, std::uint64_t seed, int length) {
  if (length < 1) throw std::invalid_argument("trace length must be at least 1");
  KeyedRng rng{seed, tag(Tag::trace)};
  NetworkTrace t;
  t.speed_kbps.reserve(std::size_t(length));
  t.regime.reserve(std::size_t(length));
  Regime r = cfg.trace.start;
  for (int step = 0; step < length; ++step) {
    if (step > 0) {
      const auto& row = cfg.trace.transition[std::size_t(r)];
      const double u = uniform(rng);
      double acc = 0.0;
      int next = kRegimeCount - 1;
      for (int k = 0; k < kRegimeCount; ++k) {
        acc += row[std::size_t(k)];
        if (u < acc) {
          next = k;
          break;
        }
      }
      // Guard against rounding in rows that sum to one: never jump to a
      // zero-probability regime.
      while (row[std::size_t(next)] == 0.0 && next > 0) --next;
      r = Regime(next);
    }
    const auto& p = cfg.trace.regimes[std::size_t(r)];
    const double noise = normal(rng, 1.0);
    double speed = 0.0;
    if (r != Regime::offline) speed = std::max(kOnlineSpeedFloor * p.mean_kbps, p.mean_kbps + p.volatility_kbps * noise);
    t.speed_kbps.push_back(speed);
    t.regime.push_back(r);
  }
  return t;
}

UserProfile gen_user(const SimConfig& cfg, std::uint64_t seed, UserId user) {
  KeyedRng rng{seed, std::uint64_t(user), tag(Tag::user)};
  std::normal_distribution<double> std_normal(0.0, 1.0);
  UserProfile u;
  u.id = user;
  u.taste.resize(cfg.engagement.latent_dim);
  for (int k = 0; k < cfg.engagement.latent_dim; ++k) u.taste(k) = std_normal(rng);
  u.bias = cfg.engagement.user_bias_sd * std_normal(rng);
  u.device_score = cfg.device.score_lo + (cfg.device.score_hi - cfg.device.score_lo) * uniform(rng);
  u.base_load = cfg.device.load_lo + (cfg.device.load_hi - cfg.device.load_lo) * uniform(rng);
  std::uniform_int_distribution<long> history(cfg.session.history_lo, cfg.session.history_hi);
  for (int d = 0; d < 7; ++d) u.consumption_history.push_back(history(rng));
  return u;
}

DeviceState device_at(const SimConfig& cfg, const UserProfile& user, const NetworkTrace& trace, int step,
                      std::uint64_t seed) {
  KeyedRng rng{seed, std::uint64_t(user.id), std::uint64_t(step), tag(Tag::device)};
  DeviceState d;
  d.device_score = user.device_score;
  d.cpu_load = std::clamp(user.base_load + normal(rng, cfg.device.load_jitter_sd), 0.0, 1.0);
  d.network_speed_kbps = trace.speed_kbps.at(std::size_t(step));
  d.is_online = trace.regime.at(std::size_t(step)) != Regime::offline;
  return d;
}

CacheView prefetch(const SimConfig& cfg, const VideoMeta& video, double speed_kbps) {
  const double seconds = speed_kbps * cfg.session.prefetch_window_s / video.bitrate_kbps;
  const double cached = std::clamp(seconds, 0.0, video.duration_s);
  return {cached / video.duration_s, cached};
}

double true_affinity(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, std::size_t index) {
  const auto& e = cfg.engagement;
  const double dot = catalog.factors.row(Eigen::Index(index)).dot(user.taste) / std::sqrt(double(e.latent_dim));
  return e.affinity_scale * dot + e.quality_weight * catalog.videos[index].latent_quality + user.bias +
         e.affinity_offset;
}

PxtrVector label_probabilities(const EngagementConfig& cfg, double mean_logit, double sd, double duration_s) {
  PxtrVector p;
  p.evr = prob_fraction_at_least(std::min(cfg.t_effective_s / duration_s, cfg.t_finish), mean_logit, sd);
  p.lvr = prob_fraction_at_least(cfg.t_long_s / duration_s, mean_logit, sd);
  p.svr = 1.0 - prob_fraction_at_least(cfg.t_short_s / duration_s, mean_logit, sd);
  p.fpr = prob_fraction_at_least(cfg.t_finish, mean_logit, sd);
  return p;
}

namespace {

// The server's affinity estimate: the user's bias is invisible to it.
double server_score(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, std::size_t index,
                    std::uint64_t seed) {
  KeyedRng rng{seed, std::uint64_t(user.id), std::uint64_t(catalog.videos[index].id), tag(Tag::server_rank)};
  return true_affinity(cfg, user, catalog, index) - user.bias + normal(rng, cfg.server.rank_noise_sd);
}

VideoMeta with_server_pxtrs(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, std::size_t index,
                            double score, std::uint64_t seed) {
  VideoMeta v = catalog.videos[index];
  KeyedRng rng{seed, std::uint64_t(user.id), std::uint64_t(v.id), tag(Tag::server_pxtr)};
  const auto& e = cfg.engagement;
  const double sd = std::hypot(e.watch_noise_sd, e.user_bias_sd);
  double p[kTaskCount];
  for (int t = 0; t < kTaskCount; ++t) {
    const double m = score + normal(rng, cfg.server.pxtr_noise_sd);
    p[t] = label_probabilities(e, m, sd, v.duration_s)[t];
  }
  v.server_pxtrs = {p[0], p[1], p[2], p[3]};
  return v;
}

std::vector<std::pair<double, std::size_t>> server_order(const SimConfig& cfg, const UserProfile& user,
                                                         const Catalog& catalog, std::uint64_t seed) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(catalog.videos.size());
  for (std::size_t i = 0; i < catalog.videos.size(); ++i)
    scored.emplace_back(server_score(cfg, user, catalog, i, seed), i);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return scored;
}

}  // namespace

std::vector<VideoMeta> server_rs_stub(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog, int k,
                                      std::uint64_t seed, const std::unordered_set<VideoId>& exclude) {
  if (k > int(catalog.videos.size())) throw std::invalid_argument("server_rs_stub: k exceeds catalog size");
  std::vector<VideoMeta> out;
  for (const auto& [score, i] : server_order(cfg, user, catalog, seed)) {
    if (int(out.size()) >= k) break;
    if (exclude.count(catalog.videos[i].id)) continue;
    out.push_back(with_server_pxtrs(cfg, user, catalog, i, score, seed));
  }
  return out;
}

ServerSession::ServerSession(const SimConfig& cfg, const UserProfile& user, const Catalog& catalog,
                             std::uint64_t seed)
    : cfg_(&cfg), user_(&user), catalog_(&catalog), seed_(seed) {
  for (const auto& [score, i] : server_order(cfg, user, catalog, seed)) {
    order_.push_back(i);
    scores_.push_back(score);
  }
}

std::vector<VideoMeta> ServerSession::next(int k) {
  std::vector<VideoMeta> out;
  while (int(out.size()) < k && cursor_ < order_.size()) {
    out.push_back(with_server_pxtrs(*cfg_, *user_, *catalog_, order_[cursor_], scores_[cursor_], seed_));
    ++cursor_;
  }
  return out;
}

PlaybackDraw playback_oracle(const VideoMeta& video, const DeviceState& device, const CacheView& cached,
                             const PlaybackConfig& cfg, KeyedRng& rng) {
  const double ratio = std::clamp(cached.cached_ratio, 0.0, 1.0);
  const double speed = device.is_online ? device.network_speed_kbps : 0.0;
  // A fully cached video plays from local storage and never waits on the network.
  const double deficit =
      ratio >= 1.0 ? 0.0 : std::max(0.0, video.bitrate_kbps / std::max(speed, cfg.speed_epsilon_kbps) - 1.0);
  const auto& b = cfg.beta;
  PlaybackDraw d;
  d.logit = b[0] + b[1] * deficit + b[2] * device.cpu_load + b[3] * (1.0 - ratio) + b[4] * video.size_tier;
  d.probability = sigmoid(d.logit);
  const double noisy = d.logit + normal(rng, cfg.noise_sigma);
  const double u = uniform(rng);
  if (!(sigmoid(noisy) > u)) return d;
  if (speed < cfg.hard_floor_kbps && ratio < cfg.min_start_ratio) {
    d.verdict = Verdict::failed_load;
  } else if (cached.cached_duration_s < cfg.first_screen_s && deficit > 0.0) {
    d.verdict = Verdict::slow_first_screen;
  } else {
    d.verdict = Verdict::stutter;
  }
  return d;
}

EngagementLabels labels_for(double watch_time_s, double duration_s, const EngagementConfig& cfg) {
  EngagementLabels l;
  l.effective = watch_time_s >= std::min(cfg.t_effective_s, cfg.t_finish * duration_s);
  l.long_view = watch_time_s >= cfg.t_long_s;
  l.short_view = watch_time_s < cfg.t_short_s;
  l.finished = watch_time_s >= cfg.t_finish * duration_s;
  return l;
}

PlaybackOutcome engagement_oracle(double affinity, const VideoMeta& video, Verdict verdict,
                                  const EngagementConfig& cfg, KeyedRng& rng) {
  const double view_logit = affinity + normal(rng, cfg.watch_noise_sd);
  PlaybackOutcome o;
  o.verdict = verdict;
  o.choppy = verdict != Verdict::ok;
  const double base = video.duration_s * sigmoid(view_logit);
  if (verdict == Verdict::failed_load) {
    o.watch_time_s = 0.0;
  } else {
    o.watch_time_s = verdict == Verdict::ok ? base : base * cfg.choppy_penalty;
  }
  o.labels = labels_for(o.watch_time_s, video.duration_s, cfg);
  return o;
}

}  // namespace grf::sim
