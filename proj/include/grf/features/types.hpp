#pragma once

#include <cstdint>
#include <deque>
#include <string>

namespace grf {

using VideoId = std::int64_t;
using UserId = std::int64_t;
using Timestamp = double;  // seconds

/// Server-side predicted rates, in the order the ranking heads use.
struct PxtrVector {
  double evr = 0.0;
  double lvr = 0.0;
  double svr = 0.0;
  double fpr = 0.0;

  double operator[](int task) const {
    switch (task) {
      case 0: return evr;
      case 1: return lvr;
      case 2: return svr;
      default: return fpr;
    }
  }
  bool operator==(const PxtrVector&) const = default;
};

inline constexpr int kTaskCount = 4;
inline constexpr const char* kTaskNames[kTaskCount] = {"evr", "lvr", "svr", "fpr"};

struct VideoMeta {
  VideoId id = 0;
  double duration_s = 0.0;
  double bitrate_kbps = 0.0;
  std::int64_t size_bytes = 0;
  int size_tier = 0;
  PxtrVector server_pxtrs;
  double latent_quality = 0.0;  // simulator only; never featurized

  bool operator==(const VideoMeta&) const = default;
};

struct DeviceState {
  double device_score = 0.5;
  double cpu_load = 0.0;
  double network_speed_kbps = 0.0;
  bool is_online = true;
};

/// Download state of one video on the device.
struct CacheView {
  double cached_ratio = 0.0;
  double cached_duration_s = 0.0;
};

struct EngagementLabels {
  bool effective = false;
  bool long_view = false;
  bool short_view = false;
  bool finished = false;

  bool operator[](int task) const {
    switch (task) {
      case 0: return effective;
      case 1: return long_view;
      case 2: return short_view;
      default: return finished;
    }
  }
  bool operator==(const EngagementLabels&) const = default;
};

struct WatchedRecord {
  VideoMeta video;
  double watch_time_s = 0.0;
  EngagementLabels labels;
  bool choppy = false;
  PxtrVector pxtrs;
};

/// Snapshot of a video that played choppy, kept in the user's choppy history.
struct ChoppySnapshot {
  double bitrate_kbps = 0.0;
  double duration_s = 0.0;
  int size_tier = 0;
  double cached_ratio = 0.0;
  double net_speed_kbps = 0.0;
};

/// One per-impression sample of the device's dynamic condition.
struct DynamicSample {
  double net_speed_kbps = 0.0;
  double cached_ratio = 0.0;
  double cpu_load = 0.0;
};

struct UpcomingVideo {
  VideoMeta video;
  CacheView cached;
};

/// Per-user rolling state. Lists are oldest-first; `push_*` enforce the
/// capacities by dropping the oldest entry.
struct SessionState {
  UserId user_id = 0;
  std::deque<WatchedRecord> watched;
  std::deque<ChoppySnapshot> choppy_history;
  std::deque<UpcomingVideo> upcoming;
  std::deque<DynamicSample> dynamic_trace;
  std::int64_t position = 0;

  std::size_t watched_capacity = 20;
  std::size_t choppy_capacity = 10;
  std::size_t dynamic_capacity = 20;

  void push_watched(WatchedRecord r) {
    watched.push_back(std::move(r));
    while (watched.size() > watched_capacity) watched.pop_front();
  }
  void push_choppy(const ChoppySnapshot& s) {
    choppy_history.push_back(s);
    while (choppy_history.size() > choppy_capacity) choppy_history.pop_front();
  }
  void push_dynamic(const DynamicSample& s) {
    dynamic_trace.push_back(s);
    while (dynamic_trace.size() > dynamic_capacity) dynamic_trace.pop_front();
  }
};

}  // namespace grf
