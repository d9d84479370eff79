#include "graphmem/optimizer.hpp"

#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

AdamOptimizer::AdamOptimizer(const ModelParams& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  slots_.reserve(params.tensors.size());
  for (const NamedTensor& t : params.tensors) {
    slots_.push_back(Slot{Tensor::zeros(t.value.shape()), Tensor::zeros(t.value.shape())});
  }
}

void AdamOptimizer::step(ModelParams& params, const std::vector<Tensor>& grads,
                         bool include_keys, double lr) {
  if (grads.size() != params.tensors.size()) {
    throw ContractError("adam: gradient list does not match parameter list");
  }
  const std::int64_t t_main = t_main_ + 1;
  const std::int64_t t_keys = t_keys_ + 1;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    NamedTensor& param = params.tensors[i];
    if (param.is_key && !include_keys) continue;
    const Tensor& g = grads[i];
    check_same_shape(param.value, g, "adam step");
    Slot& slot = slots_[i];
    const std::int64_t t = param.is_key ? t_keys : t_main;
    const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    for (std::int64_t j = 0; j < param.value.numel(); ++j) {
      const double gj = g.at(j);
      slot.m.at(j) = cfg_.beta1 * slot.m.at(j) + (1.0 - cfg_.beta1) * gj;
      slot.v.at(j) = cfg_.beta2 * slot.v.at(j) + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = slot.m.at(j) / bias1;
      const double vhat = slot.v.at(j) / bias2;
      param.value.at(j) -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  t_main_ = t_main;
  if (include_keys) t_keys_ = t_keys;
}

}  // namespace graphmem
