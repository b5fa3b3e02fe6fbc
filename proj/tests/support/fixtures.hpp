#pragma once

// Hand-built sessions shared by unit and golden tests.

#include "grf/cache/cached_video.hpp"
#include "grf/features/types.hpp"

#include <string>
#include <vector>

namespace grf::test_support {

inline VideoMeta make_video(VideoId id, double duration, double bitrate, int tier,
                            PxtrVector p = {0.4, 0.2, 0.3, 0.1}) {
  VideoMeta v;
  v.id = id;
  v.duration_s = duration;
  v.bitrate_kbps = bitrate;
  v.size_bytes = std::int64_t(duration * bitrate * 125.0);
  v.size_tier = tier;
  v.server_pxtrs = p;
  return v;
}

/// A mid-session user with partial histories, used for frozen golden output.
inline SessionState golden_session() {
  SessionState s;
  s.user_id = 42;
  s.position = 7;
  for (int i = 0; i < 7; ++i) {
    WatchedRecord w;
    w.video = make_video(100 + i, 10.0 + 7.0 * i, 800.0 + 150.0 * i, i % 3,
                         {0.1 * (i % 5), 0.05 * i, 0.9 - 0.1 * i, 0.02 * i});
    w.pxtrs = w.video.server_pxtrs;
    w.watch_time_s = 2.0 + 3.0 * i;
    w.labels = {w.watch_time_s >= 7.0, w.watch_time_s >= 18.0, w.watch_time_s < 3.0,
                w.watch_time_s >= 0.97 * w.video.duration_s};
    w.choppy = (i == 3);
    s.push_watched(w);
  }
  s.push_choppy({2400.0, 31.0, 2, 0.35, 420.0});
  for (int i = 0; i < 25; ++i) s.push_dynamic({300.0 + 250.0 * i, (i % 4) / 4.0, 0.1 + 0.03 * i});
  for (int i = 0; i < 4; ++i) s.upcoming.push_back({make_video(200 + i, 20.0 + 5 * i, 1100.0 + 300 * i, 1), {0.5, 9.0}});
  return s;
}

inline DeviceState golden_device() { return {0.63, 0.37, 2750.0, true}; }

inline CachedVideo golden_candidate() {
  CachedVideo c;
  c.meta = make_video(900, 27.5, 1350.0, 1, {0.55, 0.25, 0.15, 0.08});
  c.cached_at = 1234.5;
  c.cached_ratio = 0.6;
  c.cached_duration_s = 16.5;
  c.origin = CacheOrigin::replaced;
  return c;
}

}  // namespace grf::test_support
