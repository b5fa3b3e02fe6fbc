#pragma once

#include "grf/features/types.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace grf::rank {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RankConfig {
  int n_heads = 4;
  int d_head = 64;
  int attn_out = 64;  // width after the head-merge projection
  int n_experts = 8;
  int expert_hidden = 128;
  int tower_hidden = 64;
  double lr = 4e-5;
  int batch_size = 4096;
  // Order (evr, lvr, svr, fpr), matching PxtrVector indexing.
  std::array<double, kTaskCount> score_weights{1.0, 1.0, -1.0, 1.0};
  long checkpoint_interval_steps = 100;

  void validate() const {
    if (n_heads < 1 || d_head < 1 || attn_out < 1) throw ConfigError("rank: attention sizes must be positive");
    if (n_experts < 1 || expert_hidden < 1 || tower_hidden < 1) throw ConfigError("rank: MMoE sizes must be positive");
    if (!(lr > 0.0)) throw ConfigError("rank: lr must be positive");
    if (batch_size < 1) throw ConfigError("rank: batch_size must be positive");
    if (checkpoint_interval_steps < 1) throw ConfigError("rank: checkpoint_interval_steps must be positive");
  }
};

inline double rank_score(const PxtrVector& p, const std::array<double, kTaskCount>& w) {
  return w[0] * p.evr + w[1] * p.lvr + w[2] * p.svr + w[3] * p.fpr;
}

}  // namespace grf::rank
