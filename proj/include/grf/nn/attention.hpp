#pragma once

#include "grf/nn/layers.hpp"

#include <cmath>

namespace grf::nn {

/// Multi-head scaled dot-product target attention.
///
/// One query row per sample (projected from the target representation)
/// attends over that sample's padded sequence (keys and values projected
/// from the sequence rows). Output per sample is the concatenation of the
/// per-head context vectors, n_heads * d_head wide. A sample whose sequence
/// is fully masked gets a zero context.
///
/// Sequences are packed as (batch * length) x d_seq with a batch x length mask.
template <typename Scalar>
class TargetAttention {
 public:
  struct Cache {
    typename Dense<Scalar>::Cache query_in;
    typename Dense<Scalar>::Cache seq_in;
    Matrix<Scalar> q, k, v;   // projected
    Matrix<Scalar> weights;   // batch x (heads * length); zero on masked positions
    Mask mask;
  };

  TargetAttention() = default;
  TargetAttention(ParameterSet<Scalar>& params, const std::string& name, Index d_query, Index d_seq,
                  Index n_heads, Index d_head)
      : wq_(params, name + ".q", d_query, n_heads * d_head, false),
        wk_(params, name + ".k", d_seq, n_heads * d_head, false),
        wv_(params, name + ".v", d_seq, n_heads * d_head, false),
        n_heads_(n_heads),
        d_head_(d_head) {}

  Index out_dim() const { return n_heads_ * d_head_; }
  Index n_heads() const { return n_heads_; }
  Index d_head() const { return d_head_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& query, const Matrix<Scalar>& seq, const Mask& mask,
                         Cache* cache = nullptr) const {
    const Index batch = query.rows();
    const Index len = mask.cols();
    require_shape(mask.rows() == batch, "attention: mask rows != batch");
    require_shape(seq.rows() == batch * len, "attention: packed sequence rows != batch * length");

    Matrix<Scalar> q = wq_.forward(query, cache ? &cache->query_in : nullptr);
    Matrix<Scalar> k = wk_.forward(seq, cache ? &cache->seq_in : nullptr);
    Matrix<Scalar> v = wv_.forward(seq);
    Matrix<Scalar> weights = Matrix<Scalar>::Zero(batch, n_heads_ * len);
    Matrix<Scalar> out = Matrix<Scalar>::Zero(batch, out_dim());
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(d_head_));

    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < n_heads_; ++h) {
        const auto qh = q.row(b).segment(h * d_head_, d_head_);
        Scalar mx = -std::numeric_limits<Scalar>::infinity();
        for (Index l = 0; l < len; ++l) {
          if (!mask(b, l)) continue;
          const Scalar s = qh.dot(k.row(b * len + l).segment(h * d_head_, d_head_)) * scale;
          weights(b, h * len + l) = s;
          mx = std::max(mx, s);
        }
        if (!std::isfinite(mx)) continue;  // fully masked
        Scalar sum(0);
        for (Index l = 0; l < len; ++l) {
          if (!mask(b, l)) continue;
          Scalar& w = weights(b, h * len + l);
          w = std::exp(w - mx);
          sum += w;
        }
        for (Index l = 0; l < len; ++l) {
          if (!mask(b, l)) continue;
          Scalar& w = weights(b, h * len + l);
          w /= sum;
          out.row(b).segment(h * d_head_, d_head_) += w * v.row(b * len + l).segment(h * d_head_, d_head_);
        }
      }
    }
    if (cache != nullptr) {
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->weights = std::move(weights);
      cache->mask = mask;
    }
    return out;
  }

  struct Grads {
    Matrix<Scalar> d_query;
    Matrix<Scalar> d_seq;
  };

  Grads backward(const Cache& c, const Matrix<Scalar>& dout) {
    const Index batch = c.q.rows();
    const Index len = c.mask.cols();
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(d_head_));
    Matrix<Scalar> dq = Matrix<Scalar>::Zero(c.q.rows(), c.q.cols());
    Matrix<Scalar> dk = Matrix<Scalar>::Zero(c.k.rows(), c.k.cols());
    Matrix<Scalar> dv = Matrix<Scalar>::Zero(c.v.rows(), c.v.cols());
    std::vector<Scalar> dw(static_cast<std::size_t>(len));

    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < n_heads_; ++h) {
        const auto g = dout.row(b).segment(h * d_head_, d_head_);
        Scalar dot(0);
        for (Index l = 0; l < len; ++l) {
          if (!c.mask(b, l)) continue;
          const Scalar w = c.weights(b, h * len + l);
          dv.row(b * len + l).segment(h * d_head_, d_head_) += w * g;
          dw[l] = g.dot(c.v.row(b * len + l).segment(h * d_head_, d_head_));
          dot += w * dw[l];
        }
        for (Index l = 0; l < len; ++l) {
          if (!c.mask(b, l)) continue;
          const Scalar ds = c.weights(b, h * len + l) * (dw[l] - dot) * scale;
          dq.row(b).segment(h * d_head_, d_head_) += ds * c.k.row(b * len + l).segment(h * d_head_, d_head_);
          dk.row(b * len + l).segment(h * d_head_, d_head_) += ds * c.q.row(b).segment(h * d_head_, d_head_);
        }
      }
    }
    Grads grads;
    grads.d_query = wq_.backward(c.query_in, dq);
    grads.d_seq = wk_.backward(c.seq_in, dk);
    grads.d_seq += wv_.backward(c.seq_in, dv);
    return grads;
  }

  /// Inference for many queries against one shared sequence (length x
  /// d_seq, mask 1 x length). Keys and values are projected once.
  Matrix<Scalar> forward_shared(const Matrix<Scalar>& queries, const Matrix<Scalar>& seq,
                                const Mask& mask) const {
    const Index len = mask.cols();
    require_shape(mask.rows() == 1 && seq.rows() == len, "attention: shared sequence shape");
    Matrix<Scalar> q = wq_.forward(queries);
    Matrix<Scalar> out = Matrix<Scalar>::Zero(queries.rows(), out_dim());
    Index valid = 0;
    for (Index l = 0; l < len; ++l) valid += mask(0, l) ? 1 : 0;
    if (valid == 0) return out;
    Matrix<Scalar> packed(valid, seq.cols());
    for (Index l = 0, j = 0; l < len; ++l)
      if (mask(0, l)) packed.row(j++) = seq.row(l);
    const Matrix<Scalar> k = wk_.forward(packed);
    const Matrix<Scalar> v = wv_.forward(packed);
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(d_head_));
    for (Index h = 0; h < n_heads_; ++h) {
      Matrix<Scalar> s = q.middleCols(h * d_head_, d_head_) * k.middleCols(h * d_head_, d_head_).transpose();
      s *= scale;
      Matrix<Scalar> w = softmax(s);
      out.middleCols(h * d_head_, d_head_) = w * v.middleCols(h * d_head_, d_head_);
    }
    return out;
  }

  /// Attention weights of the last cached pass for one sample and head.
  static RowVector<Scalar> weights_of(const Cache& c, Index b, Index h) {
    const Index len = c.mask.cols();
    return c.weights.row(b).segment(h * len, len);
  }

  Dense<Scalar>& query_proj() { return wq_; }
  Dense<Scalar>& key_proj() { return wk_; }
  Dense<Scalar>& value_proj() { return wv_; }

 private:
  Dense<Scalar> wq_, wk_, wv_;
  Index n_heads_ = 1;
  Index d_head_ = 1;
};

}  // namespace grf::nn
