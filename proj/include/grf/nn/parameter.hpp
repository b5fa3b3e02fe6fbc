#pragma once

#include "grf/nn/types.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace grf::nn {

/// A trainable tensor together with its gradient and Adam moments.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> adam_m;
  Matrix<Scalar> adam_v;
  std::uint64_t step = 0;

  Index size() const { return value.size(); }
};

/// Owns every parameter of a model. Addresses are stable for the lifetime of
/// the set, so layers keep raw pointers into it.
template <typename Scalar>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<Scalar>& create(const std::string& name, Index rows, Index cols) {
    if (rows <= 0 || cols <= 0) throw ShapeError("parameter '" + name + "' has non-positive dims");
    if (index_.count(name) != 0) throw StructuralError("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter<Scalar>>();
    p->name = name;
    p->value = Matrix<Scalar>::Zero(rows, cols);
    p->grad = Matrix<Scalar>::Zero(rows, cols);
    p->adam_m = Matrix<Scalar>::Zero(rows, cols);
    p->adam_v = Matrix<Scalar>::Zero(rows, cols);
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<Scalar>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<Scalar>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& p : params_) fn(*p);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& p : params_) fn(*p);
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Glorot-uniform fill, deterministic for a given engine state.
template <typename Scalar, typename Rng>
void xavier_uniform(Parameter<Scalar>& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar, typename Rng>
void normal_fill(Parameter<Scalar>& p, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

}  // namespace grf::nn
