#pragma once

#include "grf/nn/layers.hpp"

namespace grf::nn {

/// Multi-gate mixture of experts with one tower per task.
///
/// Experts are two-layer relu perceptrons shared by all tasks. Each task has
/// a softmax gate over the experts and a one-hidden-layer tower that ends in
/// a single logit. `forward` returns batch x n_tasks logits.
template <typename Scalar>
class MMoE {
 public:
  struct Shape {
    Index d_in = 0;
    Index n_experts = 8;
    Index expert_hidden = 128;
    Index expert_out = 128;
    Index n_tasks = 4;
    Index tower_hidden = 64;
  };

  struct Cache {
    std::vector<typename Dense<Scalar>::Cache> e1, e2, gate, t1, t2;
    std::vector<Matrix<Scalar>> expert_hidden;  // relu outputs
    std::vector<Matrix<Scalar>> experts;        // relu outputs, batch x expert_out
    std::vector<Matrix<Scalar>> gate_weights;   // per task, batch x n_experts
    std::vector<Matrix<Scalar>> mixed;          // per task, batch x expert_out
    std::vector<Matrix<Scalar>> tower_hidden;
  };

  MMoE() = default;
  MMoE(ParameterSet<Scalar>& params, const std::string& name, const Shape& s) : shape_(s) {
    for (Index e = 0; e < s.n_experts; ++e) {
      const std::string p = name + ".expert" + std::to_string(e);
      expert1_.emplace_back(params, p + ".l1", s.d_in, s.expert_hidden);
      expert2_.emplace_back(params, p + ".l2", s.expert_hidden, s.expert_out);
    }
    for (Index t = 0; t < s.n_tasks; ++t) {
      const std::string p = name + ".task" + std::to_string(t);
      gates_.emplace_back(params, p + ".gate", s.d_in, s.n_experts);
      tower1_.emplace_back(params, p + ".tower1", s.expert_out, s.tower_hidden);
      tower2_.emplace_back(params, p + ".tower2", s.tower_hidden, 1);
    }
  }

  const Shape& shape() const { return shape_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    const auto ne = static_cast<std::size_t>(shape_.n_experts);
    const auto nt = static_cast<std::size_t>(shape_.n_tasks);
    Cache local;
    Cache& k = c ? *c : local;
    k.e1.assign(ne, {});
    k.e2.assign(ne, {});
    k.gate.assign(nt, {});
    k.t1.assign(nt, {});
    k.t2.assign(nt, {});
    k.expert_hidden.assign(ne, {});
    k.experts.assign(ne, {});
    k.gate_weights.assign(nt, {});
    k.mixed.assign(nt, {});
    k.tower_hidden.assign(nt, {});
    const bool rec = c != nullptr;

    for (std::size_t e = 0; e < ne; ++e) {
      k.expert_hidden[e] = relu(expert1_[e].forward(x, rec ? &k.e1[e] : nullptr));
      k.experts[e] = relu(expert2_[e].forward(k.expert_hidden[e], rec ? &k.e2[e] : nullptr));
    }
    Matrix<Scalar> logits(x.rows(), shape_.n_tasks);
    for (std::size_t t = 0; t < nt; ++t) {
      k.gate_weights[t] = softmax(gates_[t].forward(x, rec ? &k.gate[t] : nullptr));
      Matrix<Scalar> mixed = Matrix<Scalar>::Zero(x.rows(), shape_.expert_out);
      for (std::size_t e = 0; e < ne; ++e)
        mixed += (k.experts[e].array().colwise() * k.gate_weights[t].col(Index(e)).array()).matrix();
      k.tower_hidden[t] = relu(tower1_[t].forward(mixed, rec ? &k.t1[t] : nullptr));
      logits.col(Index(t)) = tower2_[t].forward(k.tower_hidden[t], rec ? &k.t2[t] : nullptr).col(0);
      k.mixed[t] = std::move(mixed);
    }
    return logits;
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dlogits) {
    const auto ne = static_cast<std::size_t>(shape_.n_experts);
    const auto nt = static_cast<std::size_t>(shape_.n_tasks);
    const Index batch = dlogits.rows();
    std::vector<Matrix<Scalar>> d_experts(ne, Matrix<Scalar>::Zero(batch, shape_.expert_out));
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(batch, shape_.d_in);

    for (std::size_t t = 0; t < nt; ++t) {
      Matrix<Scalar> dz = dlogits.col(Index(t));
      Matrix<Scalar> dh = tower2_[t].backward(c.t2[t], dz);
      Matrix<Scalar> d_mixed = tower1_[t].backward(c.t1[t], relu_backward(c.tower_hidden[t], dh));
      Matrix<Scalar> d_gate(batch, shape_.n_experts);
      for (std::size_t e = 0; e < ne; ++e) {
        d_gate.col(Index(e)) = (d_mixed.array() * c.experts[e].array()).rowwise().sum().matrix();
        d_experts[e] += (d_mixed.array().colwise() * c.gate_weights[t].col(Index(e)).array()).matrix();
      }
      dx += gates_[t].backward(c.gate[t], softmax_backward(c.gate_weights[t], d_gate));
    }
    for (std::size_t e = 0; e < ne; ++e) {
      Matrix<Scalar> dh = expert2_[e].backward(c.e2[e], relu_backward(c.experts[e], d_experts[e]));
      dx += expert1_[e].backward(c.e1[e], relu_backward(c.expert_hidden[e], dh));
    }
    return dx;
  }

  Dense<Scalar>& gate(std::size_t t) { return gates_[t]; }
  Dense<Scalar>& expert_layer1(std::size_t e) { return expert1_[e]; }
  Dense<Scalar>& expert_layer2(std::size_t e) { return expert2_[e]; }

 private:
  Shape shape_;
  std::vector<Dense<Scalar>> expert1_, expert2_, gates_, tower1_, tower2_;
};

}  // namespace grf::nn
