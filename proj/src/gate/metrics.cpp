#include "grf/gate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grf::gate {

namespace {

void require_both_classes(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == long(labels.size())) throw MetricError("metric needs both positive and negative labels");
  for (double s : scores)
    if (std::isnan(s)) throw MetricError("metric received a NaN score");
}

std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  require_both_classes(scores, labels);
  // Walk groups of tied scores from the top; each negative in a group beats
  // nothing above it, ties inside the group count half.
  const auto idx = order_desc(scores);
  double wins = 0.0;
  double pos_above = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? pos : neg) += 1.0;
      ++j;
    }
    wins += neg * (pos_above + 0.5 * pos);
    pos_above += pos;
    i = j;
  }
  const double n_pos = pos_above;
  const double n_neg = double(labels.size()) - n_pos;
  return wins / (n_pos * n_neg);
}

double recall_at_precision(const std::vector<double>& scores, const std::vector<bool>& labels, double p_target) {
  require_both_classes(scores, labels);
  const auto idx = order_desc(scores);
  const double n_pos = double(std::count(labels.begin(), labels.end(), true));
  double tp = 0.0, fp = 0.0, best = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1.0;
      ++j;
    }
    if (tp / (tp + fp) >= p_target) best = std::max(best, tp / n_pos);
    i = j;
  }
  return best;
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<bool>& labels, double threshold) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace grf::gate
