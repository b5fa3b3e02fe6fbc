#include "grf/harness/split.hpp"

namespace grf::harness {

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split_dataset: ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split_dataset: ratios must sum to 1");
  const auto rounded = [n](double r) { return std::size_t(std::floor(double(n) * r + 0.5)); };
  const std::size_t a = std::min(n, rounded(ratios[0]));
  const std::size_t b = std::min(n - a, rounded(ratios[1]));
  return {a, b, n - a - b};
}

}  // namespace grf::harness
