#pragma once

#include "grf/cache/cached_video.hpp"
#include "grf/features/schema.hpp"
#include "grf/features/types.hpp"
#include "grf/nn/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grf::features {

int bucketize(double value, double lo, double hi, int n_bins);

/// Bucket of a value under a field's bounds (and optional log grid).
int bucketize(double value, const FieldBounds& bounds, int n_bins);

/// Bin index mapped back to a [0,1] scalar for the soft-discretization scorer.
inline double bin_center(int bin, int n_bins) { return (bin + 0.5) / n_bins; }

int size_tier(std::int64_t size_bytes, std::int64_t t_small, std::int64_t t_large);
int tier_of(double value, const TierThresholds& t);

/// Single-value soft discretization: logits = value*w + b, output is the
/// softmax(logits/tau)-weighted mix of the rows of `meta`.
nn::RowVector<double> soft_discretize_embed(double value, const nn::MatrixD& meta,
                                            const nn::RowVector<double>& score_w,
                                            const nn::RowVector<double>& score_b, double tau);

struct FeatureRow {
  std::vector<int> codes;
  std::vector<float> dense;

  bool operator==(const FeatureRow&) const = default;
};

/// Fixed-capacity sequence; `rows.size()` always equals the capacity and
/// mask[i] is 1 for real entries, which occupy the head (oldest first).
struct Sequence {
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> mask;

  int valid_count() const;
  bool operator==(const Sequence&) const = default;
};

struct GateFeatureVector {
  FeatureRow static_row;
  Sequence dynamic_seq;
  Sequence choppy_seq;
  FeatureRow prior_bias;

  bool operator==(const GateFeatureVector&) const = default;
};

struct RankFeatureBundle {
  FeatureRow target;
  Sequence watched_seq;
  Sequence upcoming_seq;
  FeatureRow context;

  bool operator==(const RankFeatureBundle&) const = default;
};

GateFeatureVector build_gate_features(const SessionState& session, const DeviceState& device,
                                      const VideoMeta& target, const CacheView& cache_view,
                                      const FeatureSchema& schema);

RankFeatureBundle build_rank_features(const SessionState& session, const DeviceState& device,
                                      const CachedVideo& candidate, const std::vector<VideoMeta>& upcoming_rest,
                                      const FeatureSchema& schema);

/// Canonical text form, stable across runs and platforms; used for golden
/// fixtures and for diffing.
std::string to_text(const GateFeatureVector& f);
std::string to_text(const RankFeatureBundle& f);

/// Checks every code against its layout vocabulary; throws FeatureError.
void validate_codes(const GateFeatureVector& f, const FeatureSchema& schema);
void validate_codes(const RankFeatureBundle& f, const FeatureSchema& schema);

}  // namespace grf::features
