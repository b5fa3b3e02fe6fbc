#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace grf::features {

class FeatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Normalization range of one numeric field. With `log_scale` the bucket grid
/// is laid out over log1p(value), which suits heavy-tailed rates and speeds.
struct FieldBounds {
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;

  double transform(double v) const;
};

/// Two thresholds splitting a positive quantity into three tiers.
struct TierThresholds {
  double low = 0.0;
  double high = 1.0;
};

struct FeatureSchema {
  int n_bins = 32;
  int embed_dim = 16;
  int soft_meta = 8;
  double soft_temperature = 1.0;

  int watched_len = 20;
  int dynamic_len = 20;
  int choppy_len = 10;
  int upcoming_len = 10;

  FieldBounds duration{3.0, 180.0, true};
  FieldBounds bitrate{200.0, 10000.0, true};
  FieldBounds net_speed{0.0, 20000.0, true};
  FieldBounds device_score{0.0, 1.0, false};
  FieldBounds cpu_load{0.0, 1.0, false};
  FieldBounds cached_ratio{0.0, 1.0, false};
  FieldBounds cached_duration{0.0, 60.0, false};
  FieldBounds pxtr{0.0, 1.0, false};
  FieldBounds watch_ratio{0.0, 1.0, false};

  TierThresholds size_tiers{3.0e6, 12.0e6};
  TierThresholds bitrate_tiers{1500.0, 3000.0};
  TierThresholds duration_tiers{15.0, 60.0};

  /// Throws FeatureError naming the offending setting.
  void validate() const;
};

/// Column layout of one embedded row type: bucketized numerics first, then
/// categoricals, then raw dense reals.
struct RowLayout {
  std::vector<std::string> numeric;
  std::vector<std::pair<std::string, int>> categorical;  // name, vocabulary size
  int n_dense = 0;

  int code_count() const { return int(numeric.size() + categorical.size()); }
  int vocab_of(int column, int n_bins) const {
    return column < int(numeric.size()) ? n_bins : categorical[column - numeric.size()].second;
  }
};

RowLayout gate_static_layout();
RowLayout gate_dynamic_layout();
RowLayout gate_choppy_layout();
RowLayout gate_prior_layout();

RowLayout rank_target_layout();
RowLayout rank_watched_layout();
RowLayout rank_upcoming_layout();
RowLayout rank_context_layout();

}  // namespace grf::features
