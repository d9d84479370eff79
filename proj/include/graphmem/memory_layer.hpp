#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "graphmem/rng.hpp"
#include "graphmem/tape.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

// Trainable state of one memory layer: a multi-head key array, the per-head
// 1x1-convolution aggregation weights, and the feed-forward projection.
struct MemoryLayerParams {
  Tensor keys;             // {heads, n_out, d_in}; updated only at epoch end
  Tensor head_mix_weight;  // {heads}
  Tensor head_mix_bias;    // {1}
  Tensor proj_weight;      // {d_in, d_out}
  double temperature = 1.0;

  std::int64_t heads() const { return keys.dim(0); }
  std::int64_t n_out() const { return keys.dim(1); }
  std::int64_t d_in() const { return keys.dim(2); }
  void validate() const;
};

MemoryLayerParams init_memory_layer(std::int64_t heads, std::int64_t n_out, std::int64_t d_in,
                                    std::int64_t d_out, double temperature, Rng& rng);

// Tape handles for one layer's parameters.
struct MemoryLayerVars {
  Var keys;
  Var head_mix_weight;
  Var head_mix_bias;
  Var proj_weight;
  double temperature = 1.0;
};

MemoryLayerVars push_memory_layer(Tape& tape, const MemoryLayerParams& params);

// Per-layer soft node-to-cluster assignment; rows over unmasked nodes are
// probability distributions, masked rows are exactly zero.
struct AssignmentMatrix {
  Tensor values;  // n_in x n_out
  std::int64_t layer_index = 0;
};

// Normalized Student's-t similarity between each query row and each key:
// C[i,j] = (1 + |q_i - k_j|^2 / tau)^(-(tau+1)/2), row-normalized.
Var student_t_assignment(const Var& queries, const Var& keys_head, double tau);

// Weighted sum of per-head assignments (1x1 convolution over the head axis)
// followed by a row softmax along the cluster axis. When `node_mask` is
// given ({n} tensor of 0/1), padded rows get -1e30 added to their logits
// and are multiplied to exactly zero after the softmax.
Var aggregate_heads(const std::vector<Var>& head_assignments, const Var& head_mix_weight,
                    const Var& head_mix_bias, const Tensor* node_mask = nullptr);

// V = C^T Q: coarsened node representations in query space.
Var pool_values(const Var& assignment, const Var& queries);

// LeakyReLU(V W).
Var project_queries(const Var& values, const Var& proj_weight, double leaky_slope);

struct MemoryLayerOutput {
  Var queries_next;  // n_out x d_out
  Var assignment;    // n_in x n_out
};

// Full layer: multi-head assignment, head aggregation, pooling, projection.
// Query rows beyond the mask must be zero.
MemoryLayerOutput memory_layer_forward(const Var& queries, const MemoryLayerVars& layer,
                                       const Tensor* node_mask, double leaky_slope);

struct StackedOutput {
  Var graph_repr;                // 1 x d_last
  std::vector<Var> assignments;  // one per layer
};

// Applies the layer stack down to a single-node representation. The last
// layer must have n_out == 1 (ConfigError otherwise). The node mask applies
// to the first layer only; later layers operate on cluster rows.
StackedOutput stacked_forward(const Var& queries0, const std::vector<MemoryLayerVars>& layers,
                              const Tensor* node_mask, double leaky_slope);

}  // namespace graphmem
