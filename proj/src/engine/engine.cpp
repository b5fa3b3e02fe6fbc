#include "grf/engine/engine.hpp"

#include <algorithm>
#include <unordered_set>

namespace grf::engine {

namespace {

std::vector<VideoMeta> upcoming_metas(const SessionState& session) {
  std::vector<VideoMeta> out;
  out.reserve(session.upcoming.size());
  for (const auto& u : session.upcoming) out.push_back(u.video);
  return out;
}

DisplayDecision take_from_pool(cache::CachePool& pool, const CachedVideo& chosen, DecisionSource source,
                               Timestamp now) {
  DisplayDecision d;
  d.shown = chosen.meta;
  d.shown_cache = chosen.view();
  d.source = source;
  pool.remove_displayed(chosen.meta.id, now);
  return d;
}

}  // namespace

const char* to_string(Arm a) {
  switch (a) {
    case Arm::base: return "base";
    case Arm::gate: return "gate";
    default: return "full";
  }
}

Arm arm_from_string(const std::string& s) {
  for (Arm a : kArms)
    if (s == to_string(a)) return a;
  throw ConfigError("unknown arm '" + s + "'");
}

const char* to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::server_list: return "server_list";
    case DecisionSource::cache_replacement: return "cache_replacement";
    default: return "offline_cache";
  }
}

void EngineConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("engine: threshold must lie in (0,1)");
  if (min_playable_cached_s < 0.0) throw ConfigError("engine: min_playable_cached_s must be non-negative");
}

bool playable(const CachedVideo& c, const EngineConfig& cfg) {
  return c.cached_ratio >= 1.0 || c.cached_duration_s >= cfg.min_playable_cached_s;
}

std::vector<const CachedVideo*> eligible_candidates(const cache::CachePool& pool, const EngineConfig& cfg) {
  std::vector<const CachedVideo*> out;
  for (const auto* c : pool.list())
    if (playable(*c, cfg)) out.push_back(c);
  return out;
}

std::optional<std::size_t> choose_candidate(const std::vector<const CachedVideo*>& candidates,
                                            const SessionState& session, const DeviceState& device,
                                            const Models& models, const EngineConfig& cfg) {
  if (candidates.empty()) return std::nullopt;
  if (cfg.arm == Arm::full) {
    if (!models.rank) throw ConfigError("engine: arm full needs a ranking model");
    return rank::select_best(candidates, session, device, upcoming_metas(session), *models.rank);
  }
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto* c : candidates) scores.push_back(rank::rank_score(c->meta.server_pxtrs, cfg.score_weights));
  return rank::select_best_by_score(candidates, scores);
}

std::optional<DisplayDecision> on_scroll(SessionState& session, const DeviceState& device, cache::CachePool& pool,
                                         const Models& models, const EngineConfig& cfg,
                                         const features::FeatureSchema& schema, Timestamp now) {
  if (!device.is_online) throw std::logic_error("on_scroll called while offline");
  if (session.upcoming.empty()) return std::nullopt;
  const UpcomingVideo next = session.upcoming.front();
  session.upcoming.pop_front();

  DisplayDecision d;
  d.shown = next.video;
  d.shown_cache = next.cached;
  d.source = DecisionSource::server_list;
  if (cfg.arm == Arm::base) return d;

  if (!models.gate) throw ConfigError("engine: gated arms need a gate model");
  const double p =
      models.gate->predict(features::build_gate_features(session, device, next.video, next.cached, schema));
  d.gate_score = p;
  if (p < cfg.threshold) return d;

  const auto candidates = eligible_candidates(pool, cfg);
  const auto best = choose_candidate(candidates, session, device, models, cfg);
  if (!best) return d;  // nothing playable in the pool: show the original

  const CachedVideo chosen = *candidates[*best];
  DisplayDecision r = take_from_pool(pool, chosen, DecisionSource::cache_replacement, now);
  r.replaced = next.video;
  r.gate_score = p;
  if (cfg.reshow_replaced) pool.insert_replaced(next.video, next.cached, now);
  return r;
}

std::optional<DisplayDecision> offline_step(SessionState& session, const DeviceState& device, cache::CachePool& pool,
                                            const Models& models, const EngineConfig& cfg, Timestamp now) {
  if (device.is_online) throw std::logic_error("offline_step called while online");
  const auto candidates = pool.list();
  const auto best = choose_candidate(candidates, session, device, models, cfg);
  if (!best) return std::nullopt;
  const CachedVideo chosen = *candidates[*best];
  return take_from_pool(pool, chosen, DecisionSource::offline_cache, now);
}

void record_outcome(SessionState& session, const DeviceState& device, const DisplayDecision& decision,
                    const sim::PlaybackOutcome& outcome, const features::FeatureSchema& schema, SampleLog* log,
                    double bayes_logit, Timestamp now) {
  if (log) {
    gate::GateSample g;
    g.features = features::build_gate_features(session, device, decision.shown, decision.shown_cache, schema);
    g.label = outcome.choppy;
    g.bayes_logit = bayes_logit;
    log->gate.push_back(std::move(g));

    CachedVideo as_candidate;
    as_candidate.meta = decision.shown;
    as_candidate.cached_ratio = decision.shown_cache.cached_ratio;
    as_candidate.cached_duration_s = decision.shown_cache.cached_duration_s;
    rank::RankSample r;
    r.features = features::build_rank_features(session, device, as_candidate, upcoming_metas(session), schema);
    r.labels = outcome.labels;
    r.server_pxtrs = decision.shown.server_pxtrs;
    r.event_time = now;
    log->rank.push_back(std::move(r));
  }

  WatchedRecord w;
  w.video = decision.shown;
  w.watch_time_s = outcome.watch_time_s;
  w.labels = outcome.labels;
  w.choppy = outcome.choppy;
  w.pxtrs = decision.shown.server_pxtrs;
  session.push_watched(std::move(w));
  if (outcome.choppy) {
    session.push_choppy({decision.shown.bitrate_kbps, decision.shown.duration_s, decision.shown.size_tier,
                         decision.shown_cache.cached_ratio, device.network_speed_kbps});
  }
  session.push_dynamic({device.network_speed_kbps, decision.shown_cache.cached_ratio, device.cpu_load});
  ++session.position;
}

SessionReport run_session(UserId user, const World& world, const Models& models, const EngineConfig& cfg,
                          const features::FeatureSchema& schema, SampleLog* log) {
  const sim::SimConfig& sc = *world.config;
  const sim::UserProfile profile = sim::gen_user(sc, world.seed, user);
  const sim::NetworkTrace trace =
      sim::gen_network_trace(sc, sim::stream_key({world.seed, std::uint64_t(user)}), sc.session.length);
  sim::ServerSession server(sc, profile, *world.catalog, world.seed);

  SessionReport report;
  report.user = user;
  report.arm = cfg.arm;
  report.trace_checksum = trace.checksum();

  SessionState session;
  session.user_id = user;
  session.watched_capacity = std::size_t(schema.watched_len);
  session.choppy_capacity = std::size_t(schema.choppy_len);
  session.dynamic_capacity = std::size_t(schema.dynamic_len);

  // The session starts in the morning of day 0 with a pool prefetched the
  // evening before. Every arm gets the same pool so the arms stay paired.
  const Timestamp start = 8.0 * 3600.0;
  cache::CachePool pool(profile.consumption_history);
  pool.replenish(server.next(pool.capacity()), start - 10.0 * 3600.0);

  auto fetch_page = [&] {
    for (auto& v : server.next(sc.session.page_size)) session.upcoming.push_back({std::move(v), CacheView{}});
  };
  auto affinity_of = [&](const VideoMeta& v) {
    return sim::true_affinity(sc, profile, *world.catalog, std::size_t(v.id - 1));
  };

  bool head_prefetched = false;
  for (int step = 0; step < sc.session.length; ++step) {
    const Timestamp now = start + step * sc.session.step_seconds;
    const DeviceState device = sim::device_at(sc, profile, trace, step, world.seed);
    const sim::Regime regime = trace.regime[std::size_t(step)];

    pool.evict_expired(now);
    if (device.is_online && pool.needs_replenish()) {
      pool.replenish(server.next(pool.capacity() - int(pool.size())), now);
    }

    std::optional<DisplayDecision> decision;
    if (device.is_online) {
      if (session.upcoming.empty()) {
        fetch_page();
        head_prefetched = false;
      }
      if (!session.upcoming.empty() && !head_prefetched) {
        session.upcoming.front().cached = sim::prefetch(sc, session.upcoming.front().video, device.network_speed_kbps);
      }
      decision = on_scroll(session, device, pool, models, cfg, schema, now);
    } else if (cfg.arm == Arm::base) {
      // Without the cache protocol the player can only try whatever of the
      // next list item was already downloaded.
      if (!session.upcoming.empty()) {
        const UpcomingVideo next = session.upcoming.front();
        session.upcoming.pop_front();
        DisplayDecision d;
        d.shown = next.video;
        d.shown_cache = head_prefetched ? next.cached : CacheView{};
        decision = d;
      }
    } else {
      decision = offline_step(session, device, pool, models, cfg, now);
    }
    if (!decision) break;

    sim::KeyedRng play_rng{world.seed, std::uint64_t(user), std::uint64_t(step), std::uint64_t(decision->shown.id),
                           sim::tag(sim::Tag::playback)};
    const sim::PlaybackDraw draw =
        sim::playback_oracle(decision->shown, device, decision->shown_cache, sc.playback, play_rng);
    sim::KeyedRng engage_rng{world.seed, std::uint64_t(user), std::uint64_t(decision->shown.id),
                             sim::tag(sim::Tag::engagement)};
    const sim::PlaybackOutcome outcome =
        sim::engagement_oracle(affinity_of(decision->shown), decision->shown, draw.verdict, sc.engagement, engage_rng);

    record_outcome(session, device, *decision, outcome, schema, log, draw.logit, now);

    ImpressionRecord rec;
    rec.step = step;
    rec.regime = regime;
    rec.source = decision->source;
    rec.shown = decision->shown.id;
    rec.replaced = decision->replaced ? decision->replaced->id : 0;
    if (decision->gate_score) rec.gate_score = *decision->gate_score;
    rec.verdict = outcome.verdict;
    rec.watch_time_s = outcome.watch_time_s;
    rec.choppy = outcome.choppy;
    report.impressions.push_back(rec);
    report.watch_time_s += outcome.watch_time_s;
    if (regime != sim::Regime::good) report.watch_time_poor_s += outcome.watch_time_s;
    if (outcome.choppy) ++report.choppy_count;
    if (decision->source == DecisionSource::cache_replacement) ++report.replacements;

    // While this video plays, the next list item downloads at today's speed.
    head_prefetched = false;
    if (!session.upcoming.empty()) {
      session.upcoming.front().cached = sim::prefetch(sc, session.upcoming.front().video, device.network_speed_kbps);
      head_prefetched = true;
    }

    if (outcome.choppy) {
      sim::KeyedRng quit_rng{world.seed, std::uint64_t(user), std::uint64_t(step), sim::tag(sim::Tag::abandon)};
      if (std::uniform_real_distribution<double>(0.0, 1.0)(quit_rng) < sc.session.abandon_after_choppy) {
        report.abandoned = true;
        break;
      }
    }
  }
  return report;
}

}  // namespace grf::engine
