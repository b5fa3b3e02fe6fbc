#include "grf/harness/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace grf::harness {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

PairedTest paired_t_test(const std::vector<double>& treatment, const std::vector<double>& control) {
  if (treatment.size() != control.size()) throw std::invalid_argument("paired_t_test: sample sizes differ");
  if (treatment.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  PairedTest r;
  r.n = treatment.size();
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) d[i] = treatment[i] - control[i];
  r.mean_diff = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
  r.sd_diff = std::sqrt(ss / double(r.n - 1));
  if (r.sd_diff == 0.0) {
    if (r.mean_diff == 0.0) {
      r.t = 0.0;
      r.p_value = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
      r.p_value = 0.0;
    }
    return r;
  }
  r.t = r.mean_diff / (r.sd_diff / std::sqrt(double(r.n)));
  const boost::math::students_t dist(double(r.n - 1));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace grf::harness
