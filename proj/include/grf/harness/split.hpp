#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace grf::harness {

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

/// Part sizes for `n` records; each is within one of n * ratio.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

/// Shuffled partition, deterministic per seed. Within each part the records
/// keep their original relative order, so time-ordered input stays time
/// ordered.
template <typename T>
DatasetSplit<T> split_dataset(const std::vector<T>& records, const std::array<double, 3>& ratios = {0.8, 0.1, 0.1},
                              std::uint64_t seed = 0) {
  if (records.empty()) throw std::invalid_argument("split_dataset: empty input");
  const auto sizes = split_sizes(records.size(), ratios);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> part(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) part[order[i]] = i < sizes[0] ? 0 : (i < sizes[0] + sizes[1] ? 1 : 2);
  DatasetSplit<T> out;
  out.train.reserve(sizes[0]);
  out.valid.reserve(sizes[1]);
  out.test.reserve(sizes[2]);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& dst = part[i] == 0 ? out.train : (part[i] == 1 ? out.valid : out.test);
    dst.push_back(records[i]);
  }
  return out;
}

}  // namespace grf::harness
