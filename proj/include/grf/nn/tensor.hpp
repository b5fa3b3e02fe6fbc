#pragma once

#include "grf/nn/types.hpp"

#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace grf::nn {

/// Flat tensor: dims plus row-major float payload. This is the
/// exchange form used by checkpoints.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  static std::size_t element_count(const std::vector<std::uint32_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t d) { return a * d; });
  }

  bool valid() const {
    if (dims.empty()) return false;
    for (auto d : dims)
      if (d == 0) return false;
    return element_count(dims) == data.size();
  }

  static Tensor from_matrix(const MatrixF& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.assign(m.data(), m.data() + m.size());
    return t;
  }

  MatrixF to_matrix() const {
    require_shape(valid(), "tensor dims do not match payload");
    Index rows = dims.size() == 1 ? 1 : static_cast<Index>(dims[0]);
    Index cols = static_cast<Index>(data.size()) / rows;
    MatrixF m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
  }

  bool operator==(const Tensor&) const = default;
};

}  // namespace grf::nn
