#include "grf/features/schema.hpp"

#include <cmath>

namespace grf::features {

double FieldBounds::transform(double v) const { return log_scale ? std::log1p(std::max(v, 0.0)) : v; }

namespace {

void check_bounds(const FieldBounds& b, const char* name) {
  if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi))
    throw FeatureError(std::string("feature bounds for '") + name + "' need lo < hi");
  if (b.log_scale && b.lo < 0.0)
    throw FeatureError(std::string("log-scaled feature '") + name + "' needs lo >= 0");
}

void check_tiers(const TierThresholds& t, const char* name) {
  if (!(t.low < t.high)) throw FeatureError(std::string("tier thresholds for '") + name + "' need low < high");
}

const std::vector<std::string> kItemNumeric = {"duration", "bitrate", "evr", "lvr", "svr", "fpr"};

}  // namespace

void FeatureSchema::validate() const {
  if (n_bins < 2) throw FeatureError("n_bins must be at least 2");
  if (embed_dim < 1) throw FeatureError("embed_dim must be positive");
  if (soft_meta < 1) throw FeatureError("soft_meta must be positive");
  if (!(soft_temperature > 0.0)) throw FeatureError("soft_temperature must be positive");
  if (watched_len < 1 || dynamic_len < 1 || choppy_len < 1 || upcoming_len < 1)
    throw FeatureError("sequence capacities must be positive");
  check_bounds(duration, "duration");
  check_bounds(bitrate, "bitrate");
  check_bounds(net_speed, "net_speed");
  check_bounds(device_score, "device_score");
  check_bounds(cpu_load, "cpu_load");
  check_bounds(cached_ratio, "cached_ratio");
  check_bounds(cached_duration, "cached_duration");
  check_bounds(pxtr, "pxtr");
  check_bounds(watch_ratio, "watch_ratio");
  check_tiers(size_tiers, "size");
  check_tiers(bitrate_tiers, "bitrate");
  check_tiers(duration_tiers, "duration");
}

RowLayout gate_static_layout() {
  return {{"duration", "device_score", "bitrate", "cached_ratio", "cached_duration", "net_speed", "cpu_load"},
          {{"size_tier", 3}},
          0};
}

RowLayout gate_dynamic_layout() { return {{"net_speed", "cached_ratio", "cpu_load"}, {}, 0}; }

RowLayout gate_choppy_layout() {
  return {{"bitrate", "duration", "cached_ratio", "net_speed"}, {{"size_tier", 3}}, 0};
}

RowLayout gate_prior_layout() { return {{}, {{"size_tier", 3}, {"bitrate_tier", 3}, {"duration_tier", 3}}, 0}; }

RowLayout rank_target_layout() {
  RowLayout l{kItemNumeric, {{"size_tier", 3}}, 4};
  l.numeric.push_back("cached_ratio");
  l.numeric.push_back("cached_duration");
  return l;
}

RowLayout rank_watched_layout() {
  RowLayout l{kItemNumeric,
              {{"size_tier", 3}, {"effective", 2}, {"long", 2}, {"short", 2}, {"finished", 2}, {"choppy", 2}},
              4};
  l.numeric.push_back("watch_ratio");
  return l;
}

RowLayout rank_upcoming_layout() { return {kItemNumeric, {{"size_tier", 3}}, 4}; }

RowLayout rank_context_layout() { return {{"device_score", "net_speed", "cpu_load"}, {}, 0}; }

}  // namespace grf::features
