#pragma once

#include "grf/features/featurize.hpp"
#include "grf/nn/layers.hpp"
#include "grf/nn/soft_discretize.hpp"

#include <vector>

namespace grf::features {

using nn::Index;

/// Embeds batches of FeatureRows of one layout into
/// [numeric soft-binned | categorical lookups | dense passthrough].
///
/// Numeric codes are discrete, so each field's soft-discretized embedding is
/// evaluated once per bin and rows are gathered from that table; the table
/// gradient is scattered back per bin.
template <typename Scalar>
class RowEmbedder {
 public:
  using Matrix = nn::Matrix<Scalar>;

  struct Cache {
    std::vector<typename nn::SoftDiscretizeEmbedding<Scalar>::Cache> numeric;
    std::vector<typename nn::Embedding<Scalar>::Cache> categorical;
    std::vector<std::vector<int>> numeric_codes;
    Index rows = 0;
  };

  RowEmbedder() = default;
  RowEmbedder(nn::ParameterSet<Scalar>& params, const std::string& name, const RowLayout& layout,
              const FeatureSchema& schema)
      : layout_(layout), n_bins_(schema.n_bins), dim_(schema.embed_dim) {
    for (const auto& f : layout.numeric)
      numeric_.emplace_back(params, name + "." + f, schema.soft_meta, schema.embed_dim,
                            Scalar(schema.soft_temperature));
    for (const auto& [f, vocab] : layout.categorical)
      categorical_.emplace_back(params, name + "." + f, vocab, schema.embed_dim);
    centers_.resize(n_bins_, 1);
    for (int b = 0; b < n_bins_; ++b) centers_(b, 0) = Scalar(bin_center(b, n_bins_));
  }

  Index out_dim() const { return Index(layout_.code_count()) * dim_ + layout_.n_dense; }
  const RowLayout& layout() const { return layout_; }

  Matrix forward(const std::vector<const FeatureRow*>& rows, Cache* cache = nullptr) const {
    const Index n = Index(rows.size());
    const Index n_num = Index(numeric_.size());
    Matrix out(n, out_dim());
    if (cache != nullptr) {
      cache->rows = n;
      cache->numeric.assign(numeric_.size(), {});
      cache->categorical.assign(categorical_.size(), {});
      cache->numeric_codes.assign(numeric_.size(), std::vector<int>(n));
    }
    for (const FeatureRow* r : rows)
      if (int(r->codes.size()) != layout_.code_count() || int(r->dense.size()) != layout_.n_dense)
        throw FeatureError("feature row does not match the embedder layout");

    for (Index f = 0; f < n_num; ++f) {
      const Matrix table = numeric_[f].forward(centers_, cache ? &cache->numeric[f] : nullptr);
      for (Index i = 0; i < n; ++i) {
        const int code = rows[i]->codes[f];
        if (code < 0 || code >= n_bins_)
          throw FeatureError("numeric code " + std::to_string(code) + " outside " + std::to_string(n_bins_) + " bins");
        out.row(i).segment(f * dim_, dim_) = table.row(code);
        if (cache) cache->numeric_codes[f][i] = code;
      }
    }
    std::vector<int> ids(n);
    for (std::size_t c = 0; c < categorical_.size(); ++c) {
      for (Index i = 0; i < n; ++i) ids[i] = rows[i]->codes[n_num + c];
      out.middleCols((n_num + Index(c)) * dim_, dim_) =
          categorical_[c].forward(ids, cache ? &cache->categorical[c] : nullptr);
    }
    const Index dense_at = Index(layout_.code_count()) * dim_;
    for (Index i = 0; i < n; ++i)
      for (int d = 0; d < layout_.n_dense; ++d) out(i, dense_at + d) = Scalar(rows[i]->dense[d]);
    return out;
  }

  void backward(const Cache& cache, const Matrix& dy) {
    if (dy.rows() != cache.rows) throw nn::StructuralError("row embedder backward without a matching forward");
    const Index n_num = Index(numeric_.size());
    for (Index f = 0; f < n_num; ++f) {
      Matrix dtable = Matrix::Zero(n_bins_, dim_);
      for (Index i = 0; i < cache.rows; ++i) dtable.row(cache.numeric_codes[f][i]) += dy.row(i).segment(f * dim_, dim_);
      numeric_[f].backward(cache.numeric[f], dtable);
    }
    for (std::size_t c = 0; c < categorical_.size(); ++c)
      categorical_[c].backward(cache.categorical[c], dy.middleCols((n_num + Index(c)) * dim_, dim_));
  }

 private:
  RowLayout layout_;
  int n_bins_ = 0;
  Index dim_ = 0;
  std::vector<nn::SoftDiscretizeEmbedding<Scalar>> numeric_;
  std::vector<nn::Embedding<Scalar>> categorical_;
  Matrix centers_;
};

/// Packs a batch of sequences into (batch * length) row pointers and a mask.
inline void pack_sequences(const std::vector<const Sequence*>& seqs, std::vector<const FeatureRow*>& rows,
                           nn::Mask& mask) {
  const Index batch = Index(seqs.size());
  const Index len = batch ? Index(seqs.front()->rows.size()) : 0;
  rows.clear();
  rows.reserve(batch * len);
  mask.resize(batch, len);
  for (Index b = 0; b < batch; ++b) {
    if (Index(seqs[b]->rows.size()) != len || Index(seqs[b]->mask.size()) != len)
      throw FeatureError("sequences in a batch must share one capacity");
    for (Index l = 0; l < len; ++l) {
      rows.push_back(&seqs[b]->rows[l]);
      mask(b, l) = seqs[b]->mask[l];
    }
  }
}

}  // namespace grf::features
