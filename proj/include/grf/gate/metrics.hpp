#pragma once

#include <stdexcept>
#include <vector>

namespace grf::gate {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Probability that a random positive outscores a random negative, ties 0.5.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Highest recall over all score thresholds whose precision reaches
/// `p_target`; 0 when no threshold qualifies.
double recall_at_precision(const std::vector<double>& scores, const std::vector<bool>& labels,
                           double p_target = 0.7);

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double precision() const { return tp + fp ? double(tp) / double(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? double(tp) / double(tp + fn) : 0.0; }
};

Confusion confusion_at(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold);

}  // namespace grf::gate
