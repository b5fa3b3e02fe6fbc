#include "grf/gate/gate_model.hpp"

#include "grf/nn/init.hpp"

#include <random>

namespace grf::gate {

namespace {
constexpr std::size_t kInferenceChunk = 512;
}

GateModel::GateModel(const GateConfig& cfg, const features::FeatureSchema& schema, std::uint64_t seed)
    : cfg_(cfg), schema_(schema), params_(std::make_unique<nn::ParameterSet<float>>()) {
  cfg_.validate();
  schema_.validate();
  net_ = std::make_unique<GateNet<float>>(*params_, cfg_, schema_);
  std::mt19937_64 rng(seed);
  nn::initialize(*params_, rng);
}

double GateModel::predict(const GateFeatureVector& f) const { return predict(std::vector{&f}).front(); }

std::vector<double> GateModel::predict(const std::vector<const GateFeatureVector*>& batch) const {
  for (const auto* f : batch) features::validate_codes(*f, schema_);
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(batch.size(), start + kInferenceChunk);
    std::vector<const GateFeatureVector*> chunk(batch.begin() + long(start), batch.begin() + long(end));
    const nn::MatrixF z = net_->logits(chunk);
    for (Index i = 0; i < z.rows(); ++i) out.push_back(double(nn::sigmoid(z(i, 0))));
  }
  return out;
}

}  // namespace grf::gate
