#pragma once

#include <vector>

namespace grf::harness {

struct PairedTest {
  std::size_t n = 0;
  double mean_diff = 0.0;  // mean of treatment - control
  double sd_diff = 0.0;
  double t = 0.0;
  double p_value = 1.0;    // two-sided
};

/// Paired t-test on treatment[i] - control[i]. Identical inputs give t = 0
/// and p = 1; a constant non-zero difference gives p = 0.
PairedTest paired_t_test(const std::vector<double>& treatment, const std::vector<double>& control);

double mean(const std::vector<double>& v);

}  // namespace grf::harness
