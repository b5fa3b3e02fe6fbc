#include "grf/features/featurize.hpp"

#include "grf/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace grf::features {

int bucketize(double value, double lo, double hi, int n_bins) {
  if (!std::isfinite(value)) throw FeatureError("cannot bucketize a non-finite value");
  if (!(lo < hi)) throw FeatureError("bucketize needs lo < hi");
  if (n_bins < 1) throw FeatureError("bucketize needs a positive bin count");
  const double width = (hi - lo) / n_bins;
  const double raw = std::floor((value - lo) / width);
  if (raw < 0.0) return 0;
  if (raw >= n_bins - 1) return n_bins - 1;
  return int(raw);
}

int bucketize(double value, const FieldBounds& bounds, int n_bins) {
  if (!std::isfinite(value)) throw FeatureError("cannot bucketize a non-finite value");
  return bucketize(bounds.transform(value), bounds.transform(bounds.lo), bounds.transform(bounds.hi), n_bins);
}

int size_tier(std::int64_t size_bytes, std::int64_t t_small, std::int64_t t_large) {
  if (size_bytes < t_small) return 0;
  if (size_bytes < t_large) return 1;
  return 2;
}

int tier_of(double value, const TierThresholds& t) {
  if (value < t.low) return 0;
  if (value < t.high) return 1;
  return 2;
}

nn::RowVector<double> soft_discretize_embed(double value, const nn::MatrixD& meta,
                                            const nn::RowVector<double>& score_w,
                                            const nn::RowVector<double>& score_b, double tau) {
  if (!(tau > 0.0)) throw FeatureError("soft-discretize temperature must be positive");
  nn::require_shape(score_w.size() == meta.rows() && score_b.size() == meta.rows(),
                    "soft-discretize scorer width must match the meta table");
  nn::MatrixD logits = (value * score_w + score_b);
  const nn::MatrixD w = nn::softmax(logits, tau);
  return w.row(0) * meta;
}

int Sequence::valid_count() const {
  return int(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

void require_catalog(const VideoMeta& v) {
  if (!(v.duration_s > 0.0) || !(v.bitrate_kbps > 0.0) || v.size_bytes <= 0)
    throw FeatureError("video " + std::to_string(v.id) + " has empty or non-positive catalog fields");
  if (v.size_tier < 0 || v.size_tier > 2)
    throw FeatureError("video " + std::to_string(v.id) + " has size_tier outside {0,1,2}");
}

FeatureRow padding_row(const RowLayout& layout) {
  return {std::vector<int>(layout.code_count(), 0), std::vector<float>(layout.n_dense, 0.0f)};
}

/// Keeps the newest `capacity` items of `src` (oldest first) and pads the tail.
template <typename Container, typename MakeRow>
Sequence window(const Container& src, int capacity, const RowLayout& layout, MakeRow make_row) {
  Sequence s;
  s.rows.reserve(capacity);
  s.mask.assign(capacity, 0);
  const std::size_t n = std::min<std::size_t>(src.size(), std::size_t(capacity));
  const std::size_t first = src.size() - n;
  for (std::size_t i = 0; i < n; ++i) {
    s.rows.push_back(make_row(src[first + i]));
    s.mask[i] = 1;
  }
  while (int(s.rows.size()) < capacity) s.rows.push_back(padding_row(layout));
  return s;
}

void push_item_numeric(FeatureRow& row, const VideoMeta& v, const PxtrVector& p, const FeatureSchema& s) {
  row.codes.push_back(bucketize(v.duration_s, s.duration, s.n_bins));
  row.codes.push_back(bucketize(v.bitrate_kbps, s.bitrate, s.n_bins));
  for (int t = 0; t < kTaskCount; ++t) row.codes.push_back(bucketize(p[t], s.pxtr, s.n_bins));
}

void push_pxtr_dense(FeatureRow& row, const PxtrVector& p) {
  for (int t = 0; t < kTaskCount; ++t) row.dense.push_back(float(p[t]));
}

void append_row(std::ostringstream& os, const FeatureRow& r) {
  for (std::size_t i = 0; i < r.codes.size(); ++i) os << (i ? "," : "") << r.codes[i];
  os << "|";
  char buf[32];
  for (std::size_t i = 0; i < r.dense.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", double(r.dense[i]));
    os << (i ? "," : "") << buf;
  }
  os << "\n";
}

void append_seq(std::ostringstream& os, const char* name, const Sequence& s) {
  os << name << " mask=";
  for (auto m : s.mask) os << int(m);
  os << "\n";
  for (const auto& r : s.rows) append_row(os, r);
}

void check_row(const FeatureRow& r, const RowLayout& layout, int n_bins, const char* what) {
  if (int(r.codes.size()) != layout.code_count() || int(r.dense.size()) != layout.n_dense)
    throw FeatureError(std::string(what) + " row does not match its layout");
  for (int c = 0; c < layout.code_count(); ++c) {
    if (r.codes[c] < 0 || r.codes[c] >= layout.vocab_of(c, n_bins))
      throw FeatureError(std::string(what) + " code out of vocabulary at column " + std::to_string(c));
  }
}

void check_seq(const Sequence& s, int capacity, const RowLayout& layout, int n_bins, const char* what) {
  if (int(s.rows.size()) != capacity || int(s.mask.size()) != capacity)
    throw FeatureError(std::string(what) + " sequence length differs from its capacity");
  bool padded = false;
  for (auto m : s.mask) {
    if (m == 0) padded = true;
    else if (padded) throw FeatureError(std::string(what) + " mask has a real entry after padding");
  }
  for (const auto& r : s.rows) check_row(r, layout, n_bins, what);
}

}  // namespace

GateFeatureVector build_gate_features(const SessionState& session, const DeviceState& device,
                                      const VideoMeta& target, const CacheView& cache_view,
                                      const FeatureSchema& s) {
  require_catalog(target);
  GateFeatureVector f;
  f.static_row.codes = {
      bucketize(target.duration_s, s.duration, s.n_bins),
      bucketize(device.device_score, s.device_score, s.n_bins),
      bucketize(target.bitrate_kbps, s.bitrate, s.n_bins),
      bucketize(cache_view.cached_ratio, s.cached_ratio, s.n_bins),
      bucketize(cache_view.cached_duration_s, s.cached_duration, s.n_bins),
      bucketize(device.network_speed_kbps, s.net_speed, s.n_bins),
      bucketize(device.cpu_load, s.cpu_load, s.n_bins),
      target.size_tier,
  };
  f.dynamic_seq = window(session.dynamic_trace, s.dynamic_len, gate_dynamic_layout(), [&](const DynamicSample& d) {
    return FeatureRow{{bucketize(d.net_speed_kbps, s.net_speed, s.n_bins),
                       bucketize(d.cached_ratio, s.cached_ratio, s.n_bins),
                       bucketize(d.cpu_load, s.cpu_load, s.n_bins)},
                      {}};
  });
  f.choppy_seq = window(session.choppy_history, s.choppy_len, gate_choppy_layout(), [&](const ChoppySnapshot& c) {
    return FeatureRow{{bucketize(c.bitrate_kbps, s.bitrate, s.n_bins), bucketize(c.duration_s, s.duration, s.n_bins),
                       bucketize(c.cached_ratio, s.cached_ratio, s.n_bins),
                       bucketize(c.net_speed_kbps, s.net_speed, s.n_bins), std::clamp(c.size_tier, 0, 2)},
                      {}};
  });
  f.prior_bias.codes = {target.size_tier, tier_of(target.bitrate_kbps, s.bitrate_tiers),
                        tier_of(target.duration_s, s.duration_tiers)};
  return f;
}

RankFeatureBundle build_rank_features(const SessionState& session, const DeviceState& device,
                                      const CachedVideo& candidate, const std::vector<VideoMeta>& upcoming_rest,
                                      const FeatureSchema& s) {
  RankFeatureBundle b;
  const VideoMeta& v = candidate.meta;
  push_item_numeric(b.target, v, v.server_pxtrs, s);
  b.target.codes.push_back(bucketize(candidate.cached_ratio, s.cached_ratio, s.n_bins));
  b.target.codes.push_back(bucketize(candidate.cached_duration_s, s.cached_duration, s.n_bins));
  b.target.codes.push_back(std::clamp(v.size_tier, 0, 2));
  push_pxtr_dense(b.target, v.server_pxtrs);

  b.watched_seq = window(session.watched, s.watched_len, rank_watched_layout(), [&](const WatchedRecord& w) {
    FeatureRow r;
    push_item_numeric(r, w.video, w.pxtrs, s);
    const double ratio = w.video.duration_s > 0.0 ? w.watch_time_s / w.video.duration_s : 0.0;
    r.codes.push_back(bucketize(ratio, s.watch_ratio, s.n_bins));
    r.codes.push_back(std::clamp(w.video.size_tier, 0, 2));
    r.codes.push_back(int(w.labels.effective));
    r.codes.push_back(int(w.labels.long_view));
    r.codes.push_back(int(w.labels.short_view));
    r.codes.push_back(int(w.labels.finished));
    r.codes.push_back(int(w.choppy));
    push_pxtr_dense(r, w.pxtrs);
    return r;
  });

  // The upcoming list is the head of the server's remaining ranking, so the
  // window keeps the first entries rather than the newest.
  const std::size_t n_up = std::min<std::size_t>(upcoming_rest.size(), std::size_t(s.upcoming_len));
  std::vector<VideoMeta> head(upcoming_rest.begin(), upcoming_rest.begin() + n_up);
  b.upcoming_seq = window(head, s.upcoming_len, rank_upcoming_layout(), [&](const VideoMeta& u) {
    FeatureRow r;
    push_item_numeric(r, u, u.server_pxtrs, s);
    r.codes.push_back(std::clamp(u.size_tier, 0, 2));
    push_pxtr_dense(r, u.server_pxtrs);
    return r;
  });

  b.context.codes = {bucketize(device.device_score, s.device_score, s.n_bins),
                     bucketize(device.network_speed_kbps, s.net_speed, s.n_bins),
                     bucketize(device.cpu_load, s.cpu_load, s.n_bins)};
  return b;
}

std::string to_text(const GateFeatureVector& f) {
  std::ostringstream os;
  os << "static\n";
  append_row(os, f.static_row);
  append_seq(os, "dynamic", f.dynamic_seq);
  append_seq(os, "choppy", f.choppy_seq);
  os << "prior\n";
  append_row(os, f.prior_bias);
  return os.str();
}

std::string to_text(const RankFeatureBundle& f) {
  std::ostringstream os;
  os << "target\n";
  append_row(os, f.target);
  append_seq(os, "watched", f.watched_seq);
  append_seq(os, "upcoming", f.upcoming_seq);
  os << "context\n";
  append_row(os, f.context);
  return os.str();
}

void validate_codes(const GateFeatureVector& f, const FeatureSchema& s) {
  check_row(f.static_row, gate_static_layout(), s.n_bins, "static");
  check_seq(f.dynamic_seq, s.dynamic_len, gate_dynamic_layout(), s.n_bins, "dynamic");
  check_seq(f.choppy_seq, s.choppy_len, gate_choppy_layout(), s.n_bins, "choppy");
  check_row(f.prior_bias, gate_prior_layout(), s.n_bins, "prior");
}

void validate_codes(const RankFeatureBundle& f, const FeatureSchema& s) {
  check_row(f.target, rank_target_layout(), s.n_bins, "target");
  check_seq(f.watched_seq, s.watched_len, rank_watched_layout(), s.n_bins, "watched");
  check_seq(f.upcoming_seq, s.upcoming_len, rank_upcoming_layout(), s.n_bins, "upcoming");
  check_row(f.context, rank_context_layout(), s.n_bins, "context");
}

}  // namespace grf::features
