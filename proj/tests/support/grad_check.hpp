#pragma once

// Central finite-difference oracle for layer gradients. Test-only; it never
// calls any backward() and so stays independent of the analytic path.

#include "grf/nn/parameter.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace grf::test_support {

struct GradCheckResult {
  std::string worst_param;
  double worst_rel_error = 0.0;
};

/// Relative error of two gradient vectors: |a - n| / max(|a|, |n|), with
/// both-near-zero treated as agreement.
inline double relative_error(const nn::MatrixD& analytic, const nn::MatrixD& numeric) {
  const double diff = (analytic - numeric).norm();
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-10) return diff;
  return diff / scale;
}

/// `loss` evaluates the scalar loss from the current parameter values.
/// `analytic` must zero and then fill every parameter's grad.
inline GradCheckResult check_gradients(nn::ParameterSet<double>& params, const std::function<double()>& loss,
                                       const std::function<void()>& analytic, double h = 1e-5) {
  analytic();
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    nn::MatrixD numeric(p.value.rows(), p.value.cols());
    for (nn::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + h;
      const double up = loss();
      x = saved - h;
      const double down = loss();
      x = saved;
      numeric.data()[k] = (up - down) / (2.0 * h);
    }
    const double err = relative_error(p.grad, numeric);
    if (err > result.worst_rel_error) {
      result.worst_rel_error = err;
      result.worst_param = p.name;
    }
  }
  return result;
}

/// Finite-difference gradient with respect to an input matrix.
inline nn::MatrixD numeric_input_grad(nn::MatrixD& input, const std::function<double()>& loss, double h = 1e-5) {
  nn::MatrixD g(input.rows(), input.cols());
  for (nn::Index k = 0; k < input.size(); ++k) {
    double& x = input.data()[k];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace grf::test_support
