#pragma once

#include "grf/nn/layers.hpp"

namespace grf::nn {

/// Instance-guided mask over a feature-embedding vector.
///
///   mask   = W2 relu(W1 v + b1) + b2
///   masked = mask * (P v)
///   out    = layer_norm(relu(U masked))
template <typename Scalar>
class MaskBlock {
 public:
  struct Cache {
    typename Dense<Scalar>::Cache gen1, gen2, proj, out;
    typename LayerNorm<Scalar>::Cache norm;
    Matrix<Scalar> gen_hidden;  // relu output
    Matrix<Scalar> mask;
    Matrix<Scalar> projected;
    Matrix<Scalar> pre_norm;  // relu output
  };

  MaskBlock() = default;
  MaskBlock(ParameterSet<Scalar>& params, const std::string& name, Index d_in, Index gen_hidden,
            Index d_out)
      : gen1_(params, name + ".mask1", d_in, gen_hidden),
        gen2_(params, name + ".mask2", gen_hidden, d_in),
        proj_(params, name + ".proj", d_in, d_in, false),
        out_(params, name + ".out", d_in, d_out, false),
        norm_(params, name + ".ln", d_out) {}

  Index out_dim() const { return out_.out_dim(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& v, Cache* c = nullptr) const {
    Matrix<Scalar> h = relu(gen1_.forward(v, c ? &c->gen1 : nullptr));
    Matrix<Scalar> mask = gen2_.forward(h, c ? &c->gen2 : nullptr);
    Matrix<Scalar> p = proj_.forward(v, c ? &c->proj : nullptr);
    Matrix<Scalar> masked = mask.cwiseProduct(p);
    Matrix<Scalar> pre = relu(out_.forward(masked, c ? &c->out : nullptr));
    Matrix<Scalar> y = norm_.forward(pre, c ? &c->norm : nullptr);
    if (c != nullptr) {
      c->gen_hidden = std::move(h);
      c->mask = std::move(mask);
      c->projected = std::move(p);
      c->pre_norm = std::move(pre);
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    Matrix<Scalar> d_pre = norm_.backward(c.norm, dy);
    Matrix<Scalar> d_masked = out_.backward(c.out, relu_backward(c.pre_norm, d_pre));
    Matrix<Scalar> d_mask = d_masked.cwiseProduct(c.projected);
    Matrix<Scalar> d_proj = d_masked.cwiseProduct(c.mask);
    Matrix<Scalar> dv = proj_.backward(c.proj, d_proj);
    Matrix<Scalar> dh = gen2_.backward(c.gen2, d_mask);
    dv += gen1_.backward(c.gen1, relu_backward(c.gen_hidden, dh));
    return dv;
  }

  Dense<Scalar>& mask_gen1() { return gen1_; }
  Dense<Scalar>& mask_gen2() { return gen2_; }
  Dense<Scalar>& projection() { return proj_; }
  Dense<Scalar>& output() { return out_; }

 private:
  Dense<Scalar> gen1_, gen2_, proj_, out_;
  LayerNorm<Scalar> norm_;
};

/// Several mask blocks applied side by side to the same input; outputs are
/// concatenated.
template <typename Scalar>
class ParallelMaskNet {
 public:
  struct Cache {
    std::vector<typename MaskBlock<Scalar>::Cache> blocks;
  };

  ParallelMaskNet() = default;
  ParallelMaskNet(ParameterSet<Scalar>& params, const std::string& name, Index n_blocks, Index d_in,
                  Index gen_hidden, Index d_out) {
    if (n_blocks < 1) throw std::invalid_argument("mask net needs at least one block");
    for (Index i = 0; i < n_blocks; ++i)
      blocks_.emplace_back(params, name + ".block" + std::to_string(i), d_in, gen_hidden, d_out);
  }

  Index out_dim() const { return blocks_.empty() ? 0 : blocks_.front().out_dim() * Index(blocks_.size()); }

  Matrix<Scalar> forward(const Matrix<Scalar>& v, Cache* c = nullptr) const {
    if (c != nullptr) c->blocks.assign(blocks_.size(), {});
    const Index w = blocks_.front().out_dim();
    Matrix<Scalar> out(v.rows(), out_dim());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      out.middleCols(Index(i) * w, w) = blocks_[i].forward(v, c ? &c->blocks[i] : nullptr);
    return out;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    const Index w = blocks_.front().out_dim();
    Matrix<Scalar> dv;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      Matrix<Scalar> d = blocks_[i].backward(c.blocks[i], dy.middleCols(Index(i) * w, w));
      if (i == 0) dv = std::move(d); else dv += d;
    }
    return dv;
  }

  std::size_t size() const { return blocks_.size(); }
  MaskBlock<Scalar>& block(std::size_t i) { return blocks_[i]; }

 private:
  std::vector<MaskBlock<Scalar>> blocks_;
};

}  // namespace grf::nn
