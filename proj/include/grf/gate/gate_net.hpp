#pragma once

#include "grf/features/row_embedder.hpp"
#include "grf/gate/gate_config.hpp"
#include "grf/nn/attention.hpp"
#include "grf/nn/mask_block.hpp"

namespace grf::gate {

using features::GateFeatureVector;
using nn::Index;

/// Hierarchical target attention. Layer 1 attends from the target over the
/// dynamic trace; layer 2 attends from [target, c1] over the choppy history.
template <typename Scalar>
class HierarchicalAttention {
 public:
  using Matrix = nn::Matrix<Scalar>;
  struct Cache {
    typename nn::TargetAttention<Scalar>::Cache first, second;
    Index target_width = 0;
  };
  struct Grads {
    Matrix d_target, d_dynamic, d_choppy;
  };

  HierarchicalAttention() = default;
  HierarchicalAttention(nn::ParameterSet<Scalar>& params, const std::string& name, Index d_target, Index d_dynamic,
                        Index d_choppy, Index heads, Index width)
      : first_(params, name + ".dynamic", d_target, d_dynamic, heads, width / heads),
        second_(params, name + ".choppy", d_target + first_.out_dim(), d_choppy, heads, width / heads) {}

  Index out_dim() const { return first_.out_dim() + second_.out_dim(); }

  /// Returns [c1 | c2].
  Matrix forward(const Matrix& target, const Matrix& dynamic, const nn::Mask& dmask, const Matrix& choppy,
                 const nn::Mask& cmask, Cache* c = nullptr) const {
    Matrix c1 = first_.forward(target, dynamic, dmask, c ? &c->first : nullptr);
    Matrix q2(target.rows(), target.cols() + c1.cols());
    q2 << target, c1;
    Matrix c2 = second_.forward(q2, choppy, cmask, c ? &c->second : nullptr);
    if (c) c->target_width = target.cols();
    Matrix out(target.rows(), out_dim());
    out << c1, c2;
    return out;
  }

  Grads backward(const Cache& c, const Matrix& dout) {
    const Index w1 = first_.out_dim();
    auto g2 = second_.backward(c.second, dout.rightCols(second_.out_dim()));
    Matrix dc1 = dout.leftCols(w1) + g2.d_query.rightCols(w1);
    auto g1 = first_.backward(c.first, dc1);
    Grads g;
    g.d_target = g1.d_query + g2.d_query.leftCols(c.target_width);
    g.d_dynamic = std::move(g1.d_seq);
    g.d_choppy = std::move(g2.d_seq);
    return g;
  }

  nn::TargetAttention<Scalar>& first() { return first_; }
  nn::TargetAttention<Scalar>& second() { return second_; }

 private:
  nn::TargetAttention<Scalar> first_, second_;
};

/// Gate network: embeddings, parallel mask blocks over the static embedding,
/// hierarchical attention, prior-bias embedding and a linear head.
template <typename Scalar>
class GateNet {
 public:
  using Matrix = nn::Matrix<Scalar>;
  using Embedder = features::RowEmbedder<Scalar>;

  struct Cache {
    typename Embedder::Cache static_c, dynamic_c, choppy_c, prior_c;
    typename nn::ParallelMaskNet<Scalar>::Cache masknet;
    typename HierarchicalAttention<Scalar>::Cache attention;
    typename nn::Dense<Scalar>::Cache head;
    Index masknet_w = 0, attention_w = 0;
  };

  GateNet(nn::ParameterSet<Scalar>& params, const GateConfig& cfg, const features::FeatureSchema& schema)
      : static_(params, "gate.static", features::gate_static_layout(), schema),
        dynamic_(params, "gate.dynamic", features::gate_dynamic_layout(), schema),
        choppy_(params, "gate.choppy", features::gate_choppy_layout(), schema),
        prior_(params, "gate.prior", features::gate_prior_layout(), schema),
        masknet_(params, "gate.masknet", cfg.n_mask_blocks, static_.out_dim(), cfg.mask_gen_hidden, cfg.mask_hidden),
        attention_(params, "gate.attention", static_.out_dim(), dynamic_.out_dim(), choppy_.out_dim(), cfg.attn_heads,
                   cfg.attn_dim),
        head_(params, "gate.head", masknet_.out_dim() + attention_.out_dim() + prior_.out_dim(), 1) {}

  /// Pre-sigmoid scores, batch x 1.
  Matrix logits(const std::vector<const GateFeatureVector*>& batch, Cache* c = nullptr) const {
    std::vector<const features::FeatureRow*> st, pr, dy, ch;
    std::vector<const features::Sequence*> dseq, cseq;
    for (const auto* f : batch) {
      st.push_back(&f->static_row);
      pr.push_back(&f->prior_bias);
      dseq.push_back(&f->dynamic_seq);
      cseq.push_back(&f->choppy_seq);
    }
    nn::Mask dmask, cmask;
    features::pack_sequences(dseq, dy, dmask);
    features::pack_sequences(cseq, ch, cmask);

    const Matrix s = static_.forward(st, c ? &c->static_c : nullptr);
    const Matrix d = dynamic_.forward(dy, c ? &c->dynamic_c : nullptr);
    const Matrix h = choppy_.forward(ch, c ? &c->choppy_c : nullptr);
    const Matrix p = prior_.forward(pr, c ? &c->prior_c : nullptr);
    const Matrix m = masknet_.forward(s, c ? &c->masknet : nullptr);
    const Matrix a = attention_.forward(s, d, dmask, h, cmask, c ? &c->attention : nullptr);
    Matrix joined(s.rows(), m.cols() + a.cols() + p.cols());
    joined << m, a, p;
    if (c) {
      c->masknet_w = m.cols();
      c->attention_w = a.cols();
    }
    return head_.forward(joined, c ? &c->head : nullptr);
  }

  void backward(const Cache& c, const Matrix& dlogits) {
    const Matrix dj = head_.backward(c.head, dlogits);
    const Index pw = dj.cols() - c.masknet_w - c.attention_w;
    prior_.backward(c.prior_c, dj.rightCols(pw));
    auto ga = attention_.backward(c.attention, dj.middleCols(c.masknet_w, c.attention_w));
    Matrix ds = masknet_.backward(c.masknet, dj.leftCols(c.masknet_w));
    ds += ga.d_target;
    dynamic_.backward(c.dynamic_c, ga.d_dynamic);
    choppy_.backward(c.choppy_c, ga.d_choppy);
    static_.backward(c.static_c, ds);
  }

  nn::Dense<Scalar>& head() { return head_; }
  nn::ParallelMaskNet<Scalar>& masknet() { return masknet_; }
  HierarchicalAttention<Scalar>& attention() { return attention_; }

 private:
  Embedder static_, dynamic_, choppy_, prior_;
  nn::ParallelMaskNet<Scalar> masknet_;
  HierarchicalAttention<Scalar> attention_;
  nn::Dense<Scalar> head_;
};

}  // namespace grf::gate
