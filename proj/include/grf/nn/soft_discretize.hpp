#pragma once

#include "grf/nn/layers.hpp"

namespace grf::nn {

/// Soft-discretization embedding of one numeric field.
///
/// A scalar v (normalized to roughly [0,1]) is scored against K meta
/// embeddings by an affine map, logits = v * w + b; the output is the
/// softmax(logits / tau)-weighted mix of the meta rows, so it always lies in
/// their convex hull.
template <typename Scalar>
class SoftDiscretizeEmbedding {
 public:
  struct Cache {
    Matrix<Scalar> values;   // n x 1
    Matrix<Scalar> weights;  // n x K
  };

  SoftDiscretizeEmbedding() = default;
  SoftDiscretizeEmbedding(ParameterSet<Scalar>& params, const std::string& name, Index n_meta,
                          Index dim, Scalar temperature = Scalar(1))
      : scale_(&params.create(name + ".score_w", 1, n_meta)),
        offset_(&params.create(name + ".score_b", 1, n_meta)),
        meta_(&params.create(name + ".meta", n_meta, dim)),
        temperature_(temperature) {
    if (!(temperature > Scalar(0))) throw std::invalid_argument("soft-discretize temperature must be positive");
  }

  Index dim() const { return meta_->value.cols(); }
  Index n_meta() const { return meta_->value.rows(); }

  Matrix<Scalar> logits(const Matrix<Scalar>& values) const {
    Matrix<Scalar> z = values * scale_->value;
    z.rowwise() += offset_->value.row(0);
    return z;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& values, Cache* cache = nullptr) const {
    require_shape(values.cols() == 1, "soft-discretize expects a single column of values");
    Matrix<Scalar> w = softmax(logits(values), temperature_);
    Matrix<Scalar> out = w * meta_->value;
    if (cache != nullptr) {
      cache->values = values;
      cache->weights = std::move(w);
    }
    return out;
  }

  void backward(const Cache& cache, const Matrix<Scalar>& dy) {
    meta_->grad.noalias() += cache.weights.transpose() * dy;
    Matrix<Scalar> dw = dy * meta_->value.transpose();
    Matrix<Scalar> dz = softmax_backward(cache.weights, dw, temperature_);
    scale_->grad.noalias() += cache.values.transpose() * dz;
    offset_->grad.row(0) += dz.colwise().sum();
  }

  Parameter<Scalar>& scale() { return *scale_; }
  Parameter<Scalar>& offset() { return *offset_; }
  Parameter<Scalar>& meta() { return *meta_; }

 private:
  Parameter<Scalar>* scale_ = nullptr;
  Parameter<Scalar>* offset_ = nullptr;
  Parameter<Scalar>* meta_ = nullptr;
  Scalar temperature_ = Scalar(1);
};

}  // namespace grf::nn
