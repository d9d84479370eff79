#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphmem/model.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with first/second moment accumulators per parameter and two step
// counters: batch steps advance the main partition, epoch-end steps advance
// the key partition as well. Keys are touched only when `include_keys` is
// set, so batch updates leave them bitwise unchanged.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, AdamConfig cfg);

  // Applies one step. `grads` is aligned with params.tensors.
  void step(ModelParams& params, const std::vector<Tensor>& grads, bool include_keys, double lr);

  std::int64_t main_steps() const { return t_main_; }
  std::int64_t key_steps() const { return t_keys_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor m;
    Tensor v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_main_ = 0;
  std::int64_t t_keys_ = 0;
};

}  // namespace graphmem
