#pragma once

#include "grf/features/row_embedder.hpp"
#include "grf/nn/attention.hpp"
#include "grf/nn/mmoe.hpp"
#include "grf/rank/rank_config.hpp"

namespace grf::rank {

using features::RankFeatureBundle;
using nn::Index;

/// Multi-head target attention followed by the head-merge projection W^O and
/// the output map w_o. A fully masked sequence yields zero.
template <typename Scalar>
class AttentionStack {
 public:
  using Matrix = nn::Matrix<Scalar>;
  struct Cache {
    typename nn::TargetAttention<Scalar>::Cache attention;
    typename nn::Dense<Scalar>::Cache merge, out;
  };
  struct Grads {
    Matrix d_query, d_seq;
  };

  AttentionStack() = default;
  AttentionStack(nn::ParameterSet<Scalar>& params, const std::string& name, Index d_query, Index d_seq,
                 const RankConfig& cfg)
      : attention_(params, name, d_query, d_seq, cfg.n_heads, cfg.d_head),
        merge_(params, name + ".wO", attention_.out_dim(), cfg.attn_out, false),
        out_(params, name + ".wo", cfg.attn_out, cfg.attn_out, false) {}

  Index out_dim() const { return out_.out_dim(); }

  Matrix forward(const Matrix& query, const Matrix& seq, const nn::Mask& mask, Cache* c = nullptr) const {
    const Matrix heads = attention_.forward(query, seq, mask, c ? &c->attention : nullptr);
    return out_.forward(merge_.forward(heads, c ? &c->merge : nullptr), c ? &c->out : nullptr);
  }

  Matrix forward_shared(const Matrix& queries, const Matrix& seq, const nn::Mask& mask) const {
    return out_.forward(merge_.forward(attention_.forward_shared(queries, seq, mask)));
  }

  Grads backward(const Cache& c, const Matrix& dy) {
    const Matrix dheads = merge_.backward(c.merge, out_.backward(c.out, dy));
    auto g = attention_.backward(c.attention, dheads);
    return {std::move(g.d_query), std::move(g.d_seq)};
  }

  nn::TargetAttention<Scalar>& attention() { return attention_; }

 private:
  nn::TargetAttention<Scalar> attention_;
  nn::Dense<Scalar> merge_, out_;
};

/// Ranking network: row embeddings, attention over the watched and upcoming
/// lists from the target, fused with context and fed to a 4-task MMoE.
template <typename Scalar>
class RankNet {
 public:
  using Matrix = nn::Matrix<Scalar>;
  using Embedder = features::RowEmbedder<Scalar>;

  struct Cache {
    typename Embedder::Cache target_c, watched_c, upcoming_c, context_c;
    typename AttentionStack<Scalar>::Cache watched_att, upcoming_att;
    typename nn::MMoE<Scalar>::Cache mmoe;
  };

  RankNet(nn::ParameterSet<Scalar>& params, const RankConfig& cfg, const features::FeatureSchema& schema)
      : target_(params, "rank.target", features::rank_target_layout(), schema),
        watched_(params, "rank.watched", features::rank_watched_layout(), schema),
        upcoming_(params, "rank.upcoming", features::rank_upcoming_layout(), schema),
        context_(params, "rank.context", features::rank_context_layout(), schema),
        watched_att_(params, "rank.att_watched", target_.out_dim(), watched_.out_dim(), cfg),
        upcoming_att_(params, "rank.att_upcoming", target_.out_dim(), upcoming_.out_dim(), cfg),
        mmoe_(params, "rank.mmoe",
              {target_.out_dim() + watched_att_.out_dim() + upcoming_att_.out_dim() + context_.out_dim(),
               cfg.n_experts, cfg.expert_hidden, cfg.expert_hidden, kTaskCount, cfg.tower_hidden}) {}

  /// Task logits, batch x 4 in (evr, lvr, svr, fpr) order.
  Matrix logits(const std::vector<const RankFeatureBundle*>& batch, Cache* c = nullptr) const {
    std::vector<const features::FeatureRow*> tg, cx, wr, ur;
    std::vector<const features::Sequence*> ws, us;
    for (const auto* b : batch) {
      tg.push_back(&b->target);
      cx.push_back(&b->context);
      ws.push_back(&b->watched_seq);
      us.push_back(&b->upcoming_seq);
    }
    nn::Mask wmask, umask;
    features::pack_sequences(ws, wr, wmask);
    features::pack_sequences(us, ur, umask);
    const Matrix t = target_.forward(tg, c ? &c->target_c : nullptr);
    const Matrix w = watched_.forward(wr, c ? &c->watched_c : nullptr);
    const Matrix u = upcoming_.forward(ur, c ? &c->upcoming_c : nullptr);
    const Matrix x = context_.forward(cx, c ? &c->context_c : nullptr);
    const Matrix ow = watched_att_.forward(t, w, wmask, c ? &c->watched_att : nullptr);
    const Matrix ou = upcoming_att_.forward(t, u, umask, c ? &c->upcoming_att : nullptr);
    return mmoe_.forward(fuse(t, ow, ou, x), c ? &c->mmoe : nullptr);
  }

  void backward(const Cache& c, const Matrix& dlogits) {
    const Matrix dx = mmoe_.backward(c.mmoe, dlogits);
    const Index tw = target_.out_dim(), aw = watched_att_.out_dim(), uw = upcoming_att_.out_dim();
    Matrix dt = dx.leftCols(tw);
    auto gw = watched_att_.backward(c.watched_att, dx.middleCols(tw, aw));
    auto gu = upcoming_att_.backward(c.upcoming_att, dx.middleCols(tw + aw, uw));
    dt += gw.d_query + gu.d_query;
    context_.backward(c.context_c, dx.rightCols(context_.out_dim()));
    watched_.backward(c.watched_c, gw.d_seq);
    upcoming_.backward(c.upcoming_c, gu.d_seq);
    target_.backward(c.target_c, dt);
  }

  /// Logits for many candidate target rows that share one session context.
  /// Keys and values of both lists are projected once.
  Matrix logits_shared(const std::vector<const features::FeatureRow*>& targets, const features::Sequence& watched,
                       const features::Sequence& upcoming, const features::FeatureRow& context) const {
    const Matrix t = target_.forward(targets);
    const Matrix ow = attend_shared(watched_att_, watched_, t, watched);
    const Matrix ou = attend_shared(upcoming_att_, upcoming_, t, upcoming);
    const Matrix x1 = context_.forward({&context});
    const Matrix x = x1.replicate(t.rows(), 1);
    return mmoe_.forward(fuse(t, ow, ou, x));
  }

  nn::MMoE<Scalar>& mmoe() { return mmoe_; }
  AttentionStack<Scalar>& watched_attention() { return watched_att_; }

 private:
  static Matrix fuse(const Matrix& t, const Matrix& ow, const Matrix& ou, const Matrix& x) {
    Matrix f(t.rows(), t.cols() + ow.cols() + ou.cols() + x.cols());
    f << t, ow, ou, x;
    return f;
  }

  static Matrix attend_shared(const AttentionStack<Scalar>& stack, const Embedder& embed, const Matrix& queries,
                              const features::Sequence& seq) {
    std::vector<const features::FeatureRow*> rows;
    for (const auto& r : seq.rows) rows.push_back(&r);
    nn::Mask mask(1, Index(seq.mask.size()));
    for (std::size_t i = 0; i < seq.mask.size(); ++i) mask(0, Index(i)) = seq.mask[i];
    return stack.forward_shared(queries, embed.forward(rows), mask);
  }

  Embedder target_, watched_, upcoming_, context_;
  AttentionStack<Scalar> watched_att_, upcoming_att_;
  nn::MMoE<Scalar> mmoe_;
};

}  // namespace grf::rank
