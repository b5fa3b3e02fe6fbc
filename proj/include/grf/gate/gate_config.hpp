#pragma once

#include "grf/nn/optim.hpp"

#include <stdexcept>

namespace grf::gate {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GateConfig {
  int n_mask_blocks = 3;
  int mask_hidden = 64;      // output width of each mask block
  int mask_gen_hidden = 128; // hidden width of the mask generator
  int attn_dim = 32;
  int attn_heads = 1;
  nn::LrSchedule lr;
  double class_weight_pos = 10.0;
  double class_weight_neg = 1.0;
  int batch_size = 2048;
  int epochs = 3;
  long max_steps = 0;  // 0 = no cap
  double threshold = 0.75;

  void validate() const {
    if (n_mask_blocks < 1) throw ConfigError("gate: n_mask_blocks must be at least 1");
    if (mask_hidden < 1 || mask_gen_hidden < 1 || attn_dim < 1 || attn_heads < 1)
      throw ConfigError("gate: layer widths must be positive");
    if (attn_dim % attn_heads != 0) throw ConfigError("gate: attn_dim must be divisible by attn_heads");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("gate: threshold must lie in (0,1)");
    if (!(class_weight_pos > 0.0 && class_weight_neg > 0.0)) throw ConfigError("gate: class weights must be positive");
    if (batch_size < 1) throw ConfigError("gate: batch_size must be positive");
    if (epochs < 1) throw ConfigError("gate: epochs must be positive");
    if (max_steps < 0) throw ConfigError("gate: max_steps must be non-negative");
    try {
      lr.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("gate: ") + e.what());
    }
  }
};

}  // namespace grf::gate
