#pragma once

#include "grf/cache/cached_video.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace grf::cache {

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr int kHistoryDays = 7;

/// Largest of the recent daily consumption counts, at least 1.
int compute_capacity(const std::vector<long>& consumption_history);

/// The locally cached pool for one user. Entries are keyed by video id, so
/// iteration order (and hence every derived decision) is deterministic.
class CachePool {
 public:
  explicit CachePool(std::vector<long> consumption_history = {}, double expiry_horizon_s = 14 * kSecondsPerDay);

  int capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(VideoId id) const { return entries_.count(id) != 0; }
  const CachedVideo* find(VideoId id) const;
  const std::map<VideoId, CachedVideo>& entries() const { return entries_; }
  std::vector<const CachedVideo*> list() const;

  /// True iff the pool holds fewer than 0.75 * capacity entries.
  bool needs_replenish() const;

  /// Removes every entry whose age exceeds the horizon; returns their ids.
  std::vector<VideoId> evict_expired(Timestamp now);

  /// Adds a just-replaced video with its current download state, evicting the
  /// oldest entry first when the pool is full. Duplicates are counted and ignored.
  void insert_replaced(const VideoMeta& video, const CacheView& state, Timestamp now);

  /// Adds up to capacity - size fully prefetched videos; returns how many.
  int replenish(const std::vector<VideoMeta>& supplied, Timestamp now);

  /// Drops a displayed entry and counts it toward today's consumption.
  void remove_displayed(VideoId id, Timestamp now);

  /// Recomputes capacity from the last seven days of consumption ending at
  /// `now`; a shrunken pool drops its oldest entries.
  void refresh_capacity(Timestamp now);
  std::vector<long> consumption_history(Timestamp now) const;

  long duplicate_inserts() const { return duplicate_inserts_; }
  long absent_removals() const { return absent_removals_; }
  double expiry_horizon() const { return horizon_; }

  std::string to_json() const;
  static CachePool from_json(const std::string& text);
  bool operator==(const CachePool&) const = default;

 private:
  void evict_oldest();

  std::map<VideoId, CachedVideo> entries_;
  std::map<std::int64_t, long> daily_consumption_;  // day index -> count
  std::vector<long> seed_history_;                  // history known before the first recorded day
  int capacity_ = 1;
  double horizon_;
  long duplicate_inserts_ = 0;
  long absent_removals_ = 0;
};

}  // namespace grf::cache
