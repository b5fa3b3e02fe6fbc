#pragma once

#include "grf/features/types.hpp"

namespace grf {

enum class CacheOrigin { replenished, replaced };

/// A video in the locally-cached pool.
struct CachedVideo {
  VideoMeta meta;
  Timestamp cached_at = 0.0;
  double cached_ratio = 1.0;
  double cached_duration_s = 0.0;
  CacheOrigin origin = CacheOrigin::replenished;

  CacheView view() const { return {cached_ratio, cached_duration_s}; }
  bool operator==(const CachedVideo&) const = default;
};

inline const char* to_string(CacheOrigin o) { return o == CacheOrigin::replaced ? "replaced" : "replenished"; }

}  // namespace grf
