#pragma once

#include "grf/nn/parameter.hpp"

#include <cmath>
#include <cstdint>

namespace grf::nn {

/// Step-wise exponential decay with an initial hold period.
struct LrSchedule {
  double initial = 7e-5;
  std::int64_t hold_steps = 50;
  double decay_rate = 0.98;
  std::int64_t decay_interval = 50;

  void validate() const {
    if (!(initial > 0.0)) throw std::invalid_argument("lr schedule: initial must be positive");
    if (hold_steps < 0) throw std::invalid_argument("lr schedule: hold_steps must be non-negative");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw std::invalid_argument("lr schedule: decay_rate must be in (0,1]");
    if (decay_interval <= 0) throw std::invalid_argument("lr schedule: decay_interval must be positive");
  }

  double at(std::int64_t step) const {
    if (step < hold_steps) return initial;
    const auto decays = (step - hold_steps) / decay_interval + 1;
    return initial * std::pow(decay_rate, static_cast<double>(decays));
  }
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update over every parameter, then zero the gradients.
/// Throws NumericError naming the first parameter with a non-finite gradient;
/// in that case no parameter is modified.
template <typename Scalar>
void adam_step(ParameterSet<Scalar>& params, double lr, const AdamOptions& opt = {}) {
  params.for_each([](const Parameter<Scalar>& p) {
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  });
  params.for_each([&](Parameter<Scalar>& p) {
    ++p.step;
    const double t = static_cast<double>(p.step);
    const Scalar b1 = Scalar(opt.beta1), b2 = Scalar(opt.beta2);
    const Scalar c1 = Scalar(1.0 - std::pow(opt.beta1, t));
    const Scalar c2 = Scalar(1.0 - std::pow(opt.beta2, t));
    const Scalar step = Scalar(lr);
    const Scalar eps = Scalar(opt.eps);
    p.adam_m = b1 * p.adam_m + (Scalar(1) - b1) * p.grad;
    p.adam_v = b2 * p.adam_v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= step * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + eps);
    p.grad.setZero();
  });
}

}  // namespace grf::nn
