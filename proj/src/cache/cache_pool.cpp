#include "grf/cache/cache_pool.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace grf::cache {

using nlohmann::json;

int compute_capacity(const std::vector<long>& consumption_history) {
  long best = 0;
  for (long c : consumption_history) best = std::max(best, c);
  return int(std::max(1L, best));
}

CachePool::CachePool(std::vector<long> consumption_history, double expiry_horizon_s)
    : seed_history_(std::move(consumption_history)), horizon_(expiry_horizon_s) {
  if (!(expiry_horizon_s > 0.0)) throw std::invalid_argument("cache expiry horizon must be positive");
  if (seed_history_.size() > std::size_t(kHistoryDays))
    seed_history_.erase(seed_history_.begin(), seed_history_.end() - kHistoryDays);
  capacity_ = compute_capacity(seed_history_);
}

const CachedVideo* CachePool::find(VideoId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<const CachedVideo*> CachePool::list() const {
  std::vector<const CachedVideo*> out;
  out.reserve(entries_.size());
  for (const auto& [id, v] : entries_) out.push_back(&v);
  return out;
}

bool CachePool::needs_replenish() const { return double(entries_.size()) < 0.75 * double(capacity_); }

std::vector<VideoId> CachePool::evict_expired(Timestamp now) {
  std::vector<VideoId> evicted;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.cached_at > horizon_) {
      evicted.push_back(it->first);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return evicted;
}

void CachePool::evict_oldest() {
  auto oldest = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it)
    if (it->second.cached_at < oldest->second.cached_at) oldest = it;
  entries_.erase(oldest);
}

void CachePool::insert_replaced(const VideoMeta& video, const CacheView& state, Timestamp now) {
  if (contains(video.id)) {
    ++duplicate_inserts_;
    return;
  }
  while (!entries_.empty() && entries_.size() >= std::size_t(capacity_)) evict_oldest();
  CachedVideo c;
  c.meta = video;
  c.cached_at = now;
  c.cached_ratio = std::clamp(state.cached_ratio, 0.0, 1.0);
  c.cached_duration_s = std::min(state.cached_duration_s, video.duration_s);
  c.origin = CacheOrigin::replaced;
  entries_.emplace(video.id, c);
}

int CachePool::replenish(const std::vector<VideoMeta>& supplied, Timestamp now) {
  int added = 0;
  for (const auto& v : supplied) {
    if (entries_.size() >= std::size_t(capacity_)) break;
    if (contains(v.id)) continue;
    CachedVideo c;
    c.meta = v;
    c.cached_at = now;
    c.cached_ratio = 1.0;
    c.cached_duration_s = v.duration_s;
    c.origin = CacheOrigin::replenished;
    entries_.emplace(v.id, c);
    ++added;
  }
  return added;
}

void CachePool::remove_displayed(VideoId id, Timestamp now) {
  if (entries_.erase(id) == 0) {
    ++absent_removals_;
    return;
  }
  ++daily_consumption_[std::int64_t(std::floor(now / kSecondsPerDay))];
}

std::vector<long> CachePool::consumption_history(Timestamp now) const {
  const auto today = std::int64_t(std::floor(now / kSecondsPerDay));
  std::vector<long> out;
  for (std::int64_t day = today - kHistoryDays + 1; day <= today; ++day) {
    if (day >= 0) {
      auto it = daily_consumption_.find(day);
      out.push_back(it == daily_consumption_.end() ? 0 : it->second);
    } else {
      // Days before the simulation start come from the seeded history,
      // whose last element is day -1.
      const auto back = std::int64_t(seed_history_.size()) + day;
      out.push_back(back >= 0 ? seed_history_[std::size_t(back)] : 0);
    }
  }
  return out;
}

void CachePool::refresh_capacity(Timestamp now) {
  capacity_ = compute_capacity(consumption_history(now));
  while (entries_.size() > std::size_t(capacity_)) evict_oldest();
}

namespace {

json video_to_json(const VideoMeta& v) {
  return {{"id", v.id},
          {"duration_s", v.duration_s},
          {"bitrate_kbps", v.bitrate_kbps},
          {"size_bytes", v.size_bytes},
          {"size_tier", v.size_tier},
          {"pxtr", {v.server_pxtrs.evr, v.server_pxtrs.lvr, v.server_pxtrs.svr, v.server_pxtrs.fpr}},
          {"latent_quality", v.latent_quality}};
}

VideoMeta video_from_json(const json& j) {
  VideoMeta v;
  v.id = j.at("id").get<VideoId>();
  v.duration_s = j.at("duration_s").get<double>();
  v.bitrate_kbps = j.at("bitrate_kbps").get<double>();
  v.size_bytes = j.at("size_bytes").get<std::int64_t>();
  v.size_tier = j.at("size_tier").get<int>();
  const auto& p = j.at("pxtr");
  v.server_pxtrs = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()};
  v.latent_quality = j.at("latent_quality").get<double>();
  return v;
}

}  // namespace

std::string CachePool::to_json() const {
  json entries = json::array();
  for (const auto& [id, c] : entries_)
    entries.push_back({{"meta", video_to_json(c.meta)},
                       {"cached_at", c.cached_at},
                       {"cached_ratio", c.cached_ratio},
                       {"cached_duration_s", c.cached_duration_s},
                       {"origin", to_string(c.origin)}});
  json days = json::array();
  for (const auto& [day, n] : daily_consumption_) days.push_back({day, n});
  json j = {{"capacity", capacity_},
            {"horizon_s", horizon_},
            {"seed_history", seed_history_},
            {"daily_consumption", days},
            {"duplicate_inserts", duplicate_inserts_},
            {"absent_removals", absent_removals_},
            {"entries", entries}};
  return j.dump();
}

CachePool CachePool::from_json(const std::string& text) {
  const json j = json::parse(text);
  CachePool pool(j.at("seed_history").get<std::vector<long>>(), j.at("horizon_s").get<double>());
  pool.capacity_ = j.at("capacity").get<int>();
  pool.duplicate_inserts_ = j.at("duplicate_inserts").get<long>();
  pool.absent_removals_ = j.at("absent_removals").get<long>();
  for (const auto& d : j.at("daily_consumption")) pool.daily_consumption_[d.at(0).get<std::int64_t>()] = d.at(1).get<long>();
  for (const auto& e : j.at("entries")) {
    CachedVideo c;
    c.meta = video_from_json(e.at("meta"));
    c.cached_at = e.at("cached_at").get<double>();
    c.cached_ratio = e.at("cached_ratio").get<double>();
    c.cached_duration_s = e.at("cached_duration_s").get<double>();
    c.origin = e.at("origin").get<std::string>() == "replaced" ? CacheOrigin::replaced : CacheOrigin::replenished;
    pool.entries_.emplace(c.meta.id, c);
  }
  return pool;
}

}  // namespace grf::cache
