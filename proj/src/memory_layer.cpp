#include "graphmem/memory_layer.hpp"

#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

void MemoryLayerParams::validate() const {
  if (keys.rank() != 3) throw ConfigError("memory layer keys must be rank-3");
  if (heads() < 1) throw ConfigError("memory layer needs at least one head");
  if (n_out() < 1) throw ConfigError("memory layer needs at least one key per head");
  if (!(temperature > 0.0)) throw ConfigError("memory layer temperature must be positive");
  if (head_mix_weight.numel() != heads()) {
    throw ConfigError("head_mix_weight length must equal head count");
  }
  if (head_mix_bias.numel() != 1) throw ConfigError("head_mix_bias must be a single scalar");
  if (proj_weight.rank() != 2 || proj_weight.rows() != d_in()) {
    throw ConfigError("projection weight rows must match key dimension");
  }
}

MemoryLayerParams init_memory_layer(std::int64_t heads, std::int64_t n_out, std::int64_t d_in,
                                    std::int64_t d_out, double temperature, Rng& rng) {
  MemoryLayerParams p;
  p.temperature = temperature;
  const double key_bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  p.keys = Tensor({heads, n_out, d_in});
  for (auto& v : p.keys.data()) v = rng.uniform(-key_bound, key_bound);
  const double mix_bound = 1.0 / std::sqrt(static_cast<double>(heads));
  p.head_mix_weight = Tensor({heads});
  for (auto& v : p.head_mix_weight.data()) v = rng.uniform(-mix_bound, mix_bound);
  p.head_mix_bias = Tensor({1});
  p.proj_weight = Tensor({d_in, d_out});
  for (auto& v : p.proj_weight.data()) v = rng.uniform(-key_bound, key_bound);
  p.validate();
  return p;
}

MemoryLayerVars push_memory_layer(Tape& tape, const MemoryLayerParams& params) {
  MemoryLayerVars vars;
  vars.keys = tape.param(params.keys);
  vars.head_mix_weight = tape.param(params.head_mix_weight);
  vars.head_mix_bias = tape.param(params.head_mix_bias);
  vars.proj_weight = tape.param(params.proj_weight);
  vars.temperature = params.temperature;
  return vars;
}

Var student_t_assignment(const Var& queries, const Var& keys_head, double tau) {
  return row_normalize(student_t_kernel(pairwise_sq_dist(queries, keys_head), tau));
}

Var aggregate_heads(const std::vector<Var>& head_assignments, const Var& head_mix_weight,
                    const Var& head_mix_bias, const Tensor* node_mask) {
  if (head_assignments.empty()) throw ContractError("aggregate_heads: no heads");
  if (head_mix_weight.value().numel() != static_cast<std::int64_t>(head_assignments.size())) {
    throw ShapeError("aggregate_heads: one mix weight per head required");
  }
  Tape* tape = head_assignments[0].tape();
  Var logits = scale_by(head_assignments[0], select_entry(head_mix_weight, 0));
  for (std::size_t h = 1; h < head_assignments.size(); ++h) {
    logits = add(logits, scale_by(head_assignments[h],
                                  select_entry(head_mix_weight, static_cast<std::int64_t>(h))));
  }
  logits = add_scalar(logits, head_mix_bias);

  const std::int64_t n = logits.value().rows();
  const std::int64_t n_out = logits.value().cols();
  if (node_mask == nullptr) return row_softmax(logits);

  if (node_mask->numel() != n) {
    throw ShapeError("aggregate_heads: node mask length must match query count");
  }
  // Padded rows: -1e30 on the pre-softmax logits, then an exact zero via the
  // post-softmax row mask.
  Tensor shift({n, n_out});
  Tensor keep({n, n_out});
  for (std::int64_t i = 0; i < n; ++i) {
    const bool masked = node_mask->at(i) == 0.0;
    for (std::int64_t j = 0; j < n_out; ++j) {
      shift.at(i, j) = masked ? -1e30 : 0.0;
      keep.at(i, j) = masked ? 0.0 : 1.0;
    }
  }
  Var soft = row_softmax(add(logits, tape->constant(std::move(shift))));
  return mul(soft, tape->constant(std::move(keep)));
}

Var pool_values(const Var& assignment, const Var& queries) {
  return matmul(transpose(assignment), queries);
}

Var project_queries(const Var& values, const Var& proj_weight, double leaky_slope) {
  return leaky_relu(matmul(values, proj_weight), leaky_slope);
}

MemoryLayerOutput memory_layer_forward(const Var& queries, const MemoryLayerVars& layer,
                                       const Tensor* node_mask, double leaky_slope) {
  const std::int64_t heads = layer.keys.value().dim(0);
  std::vector<Var> head_assignments;
  head_assignments.reserve(static_cast<std::size_t>(heads));
  for (std::int64_t h = 0; h < heads; ++h) {
    head_assignments.push_back(
        student_t_assignment(queries, slice_head(layer.keys, h), layer.temperature));
  }
  MemoryLayerOutput out;
  out.assignment =
      aggregate_heads(head_assignments, layer.head_mix_weight, layer.head_mix_bias, node_mask);
  Var values = pool_values(out.assignment, queries);
  out.queries_next = project_queries(values, layer.proj_weight, leaky_slope);
  return out;
}

StackedOutput stacked_forward(const Var& queries0, const std::vector<MemoryLayerVars>& layers,
                              const Tensor* node_mask, double leaky_slope) {
  if (layers.empty()) throw ConfigError("stacked_forward: at least one memory layer required");
  if (layers.back().keys.value().dim(1) != 1) {
    throw ConfigError("stacked_forward: last memory layer must have a single key");
  }
  StackedOutput out;
  Var q = queries0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor* mask = l == 0 ? node_mask : nullptr;
    MemoryLayerOutput layer_out = memory_layer_forward(q, layers[l], mask, leaky_slope);
    out.assignments.push_back(layer_out.assignment);
    q = layer_out.queries_next;
  }
  out.graph_repr = q;
  return out;
}

}  // namespace graphmem
