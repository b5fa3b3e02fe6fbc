#pragma once

#include "grf/nn/parameter.hpp"

#include <string>

namespace grf::nn {

inline bool ends_with(const std::string& s, const char* suffix) {
  const std::string x(suffix);
  return s.size() >= x.size() && s.compare(s.size() - x.size(), x.size(), x) == 0;
}

/// Initializes every parameter from its name suffix: affine weights are
/// Glorot-uniform, lookup tables small normals, soft-binning slopes wide
/// normals so that bins separate, gains one and everything else zero.
/// Parameters are visited in creation order, so a seed fixes the result.
template <typename Scalar, typename Rng>
void initialize(ParameterSet<Scalar>& params, Rng& rng) {
  params.for_each([&](Parameter<Scalar>& p) {
    if (ends_with(p.name, ".score_w")) normal_fill(p, rng, 4.0);
    else if (ends_with(p.name, ".score_b")) normal_fill(p, rng, 1.0);
    else if (ends_with(p.name, ".table") || ends_with(p.name, ".meta")) normal_fill(p, rng, 0.1);
    else if (ends_with(p.name, ".w")) xavier_uniform(p, rng);
    else if (ends_with(p.name, ".gain")) p.value.setOnes();
    else p.value.setZero();
    p.grad.setZero();
    p.adam_m.setZero();
    p.adam_v.setZero();
    p.step = 0;
  });
}

}  // namespace grf::nn
