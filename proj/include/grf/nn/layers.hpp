#pragma once

#include "grf/nn/parameter.hpp"
#include "grf/nn/types.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace grf::nn {

// ---------------------------------------------------------------------------
// Element-wise activations

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

/// Gradient of relu given its *output*.
template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& dy) {
  return (y.array() > Scalar(0)).select(dy, Scalar(0));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) {
    const Scalar e = std::exp(-z);
    return Scalar(1) / (Scalar(1) + e);
  }
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& z) {
  return z.unaryExpr([](Scalar v) { return sigmoid(v); });
}

// ---------------------------------------------------------------------------
// Row softmax with temperature

template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& x, Scalar temperature = Scalar(1)) {
  if (!(temperature > Scalar(0))) throw NumericError("softmax temperature must be positive");
  if (!x.allFinite()) throw NumericError("softmax input is not finite");
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mx = x.row(r).maxCoeff();
    Scalar sum(0);
    for (Index c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp((x(r, c) - mx) / temperature);
      sum += out(r, c);
    }
    out.row(r) /= sum;
  }
  return out;
}

/// Backward of row softmax given its output y.
template <typename Scalar>
Matrix<Scalar> softmax_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& dy,
                                Scalar temperature = Scalar(1)) {
  Matrix<Scalar> dx(y.rows(), y.cols());
  for (Index r = 0; r < y.rows(); ++r) {
    const Scalar dot = y.row(r).dot(dy.row(r));
    dx.row(r) = (y.row(r).array() * (dy.row(r).array() - dot)).matrix() / temperature;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Column concatenation helpers

template <typename Scalar>
Matrix<Scalar> hconcat(const std::vector<const Matrix<Scalar>*>& parts) {
  require_shape(!parts.empty(), "hconcat of nothing");
  const Index rows = parts.front()->rows();
  Index cols = 0;
  for (const auto* p : parts) {
    require_shape(p->rows() == rows, "hconcat row mismatch");
    cols += p->cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Affine layer: y = x W + b, W is d_in x d_out.
template <typename Scalar>
class Dense {
 public:
  struct Cache {
    Matrix<Scalar> x;
  };

  Dense() = default;
  Dense(ParameterSet<Scalar>& params, const std::string& name, Index d_in, Index d_out,
        bool with_bias = true)
      : weight_(&params.create(name + ".w", d_in, d_out)),
        bias_(with_bias ? &params.create(name + ".b", 1, d_out) : nullptr) {}

  Index in_dim() const { return weight_->value.rows(); }
  Index out_dim() const { return weight_->value.cols(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    require_shape(x.cols() == in_dim(), "dense: input width " + std::to_string(x.cols()) +
                                            " != " + std::to_string(in_dim()) + " (" +
                                            weight_->name + ")");
    Matrix<Scalar> y = x * weight_->value;
    if (bias_ != nullptr) y.rowwise() += bias_->value.row(0);
    if (cache != nullptr) cache->x = x;
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    if (cache.x.rows() != dy.rows())
      throw StructuralError("dense '" + weight_->name + "': backward without a matching recorded forward");
    weight_->grad.noalias() += cache.x.transpose() * dy;
    if (bias_ != nullptr) bias_->grad.row(0) += dy.colwise().sum();
    return dy * weight_->value.transpose();
  }

  Parameter<Scalar>& weight() { return *weight_; }
  Parameter<Scalar>* bias() { return bias_; }
  const Parameter<Scalar>& weight() const { return *weight_; }

 private:
  Parameter<Scalar>* weight_ = nullptr;
  Parameter<Scalar>* bias_ = nullptr;
};

/// Per-row layer normalization with learned gain and shift.
template <typename Scalar>
class LayerNorm {
 public:
  struct Cache {
    Matrix<Scalar> x_hat;
    Matrix<Scalar> inv_std;  // rows x 1
  };

  LayerNorm() = default;
  LayerNorm(ParameterSet<Scalar>& params, const std::string& name, Index dim, Scalar eps = Scalar(1e-5))
      : gain_(&params.create(name + ".gain", 1, dim)),
        shift_(&params.create(name + ".shift", 1, dim)),
        eps_(eps) {
    gain_->value.setOnes();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    require_shape(x.cols() == gain_->value.cols(), "layer_norm: width mismatch");
    const Index n = x.cols();
    Matrix<Scalar> x_hat(x.rows(), n);
    Matrix<Scalar> inv_std(x.rows(), 1);
    for (Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).mean();
      const Scalar var = (x.row(r).array() - mean).square().sum() / Scalar(n);
      inv_std(r, 0) = Scalar(1) / std::sqrt(var + eps_);
      x_hat.row(r) = (x.row(r).array() - mean) * inv_std(r, 0);
    }
    Matrix<Scalar> y = x_hat.array().rowwise() * gain_->value.row(0).array();
    y.rowwise() += shift_->value.row(0);
    if (cache != nullptr) {
      cache->x_hat = std::move(x_hat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    const Index n = dy.cols();
    gain_->grad.row(0) += (dy.array() * cache.x_hat.array()).colwise().sum().matrix();
    shift_->grad.row(0) += dy.colwise().sum();
    Matrix<Scalar> dx_hat = dy.array().rowwise() * gain_->value.row(0).array();
    Matrix<Scalar> dx(dy.rows(), n);
    for (Index r = 0; r < dy.rows(); ++r) {
      const Scalar mean_d = dx_hat.row(r).mean();
      const Scalar mean_dx = dx_hat.row(r).dot(cache.x_hat.row(r)) / Scalar(n);
      dx.row(r) = cache.inv_std(r, 0) *
                  (dx_hat.row(r).array() - mean_d - cache.x_hat.row(r).array() * mean_dx).matrix();
    }
    return dx;
  }

 private:
  Parameter<Scalar>* gain_ = nullptr;
  Parameter<Scalar>* shift_ = nullptr;
  Scalar eps_ = Scalar(1e-5);
};

/// Lookup table for categorical codes.
template <typename Scalar>
class Embedding {
 public:
  struct Cache {
    std::vector<int> ids;
  };

  Embedding() = default;
  Embedding(ParameterSet<Scalar>& params, const std::string& name, Index vocab, Index dim)
      : table_(&params.create(name + ".table", vocab, dim)) {}

  Index vocab() const { return table_->value.rows(); }
  Index dim() const { return table_->value.cols(); }

  Matrix<Scalar> forward(const std::vector<int>& ids, Cache* cache = nullptr) const {
    Matrix<Scalar> out(static_cast<Index>(ids.size()), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= vocab())
        throw std::out_of_range("embedding '" + table_->name + "': code " + std::to_string(ids[i]) +
                                " outside vocabulary of " + std::to_string(vocab()));
      out.row(static_cast<Index>(i)) = table_->value.row(ids[i]);
    }
    if (cache != nullptr) cache->ids = ids;
    return out;
  }

  void backward(const Cache& cache, const Matrix<Scalar>& dy) {
    for (std::size_t i = 0; i < cache.ids.size(); ++i)
      table_->grad.row(cache.ids[i]) += dy.row(static_cast<Index>(i));
  }

  Parameter<Scalar>& table() { return *table_; }

 private:
  Parameter<Scalar>* table_ = nullptr;
};

// ---------------------------------------------------------------------------
// Losses

template <typename Scalar>
struct LossGrad {
  Scalar loss;
  Matrix<Scalar> dlogits;
};

/// Weighted binary cross-entropy from logits, averaged over the batch.
/// `weights` may be empty (all ones). Entries with weight 0 are ignored.
template <typename Scalar>
LossGrad<Scalar> weighted_bce_with_logits(const Matrix<Scalar>& logits, const Matrix<Scalar>& labels,
                                          const Matrix<Scalar>& weights) {
  require_shape(logits.rows() == labels.rows() && logits.cols() == labels.cols(),
                "bce: logits/labels mismatch");
  const bool weighted = weights.size() != 0;
  if (weighted)
    require_shape(weights.rows() == logits.rows() && weights.cols() == logits.cols(),
                  "bce: weight shape mismatch");
  const Scalar inv_n = Scalar(1) / Scalar(logits.rows());
  LossGrad<Scalar> out{Scalar(0), Matrix<Scalar>(logits.rows(), logits.cols())};
  for (Index i = 0; i < logits.size(); ++i) {
    const Scalar z = logits.data()[i];
    const Scalar y = labels.data()[i];
    const Scalar w = weighted ? weights.data()[i] : Scalar(1);
    // softplus(z) - y z, stable for large |z|
    const Scalar softplus = z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += w * (softplus - y * z) * inv_n;
    out.dlogits.data()[i] = w * (sigmoid(z) - y) * inv_n;
  }
  return out;
}

}  // namespace grf::nn
