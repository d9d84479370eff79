#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphmem/batch.hpp"
#include "graphmem/diffusion.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/memory_layer.hpp"
#include "graphmem/query_networks.hpp"
#include "graphmem/rng.hpp"
#include "graphmem/tape.hpp"

namespace graphmem {

enum class ModelKind { gmn, memgnn };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Architecture description; together with the trained tensors this is the
// whole checkpoint.
struct ModelConfig {
  ModelKind kind = ModelKind::gmn;
  Task task = Task::multiclass;
  std::vector<std::int64_t> key_schedule;  // strictly decreasing, ends at 1
  std::int64_t heads = 1;
  std::int64_t hidden_dim = 16;
  double tau = 1.0;
  double leaky_slope = 0.01;
  double dropout = 0.0;
  std::int64_t d_in = 0;
  std::int64_t d_e = 0;          // dataset edge feature dim (0 = none)
  std::int64_t class_count = 0;  // 0 for regression
  std::int64_t n_max = 0;

  // gmn path
  DiffusionConfig diffusion;
  bool sort_topo = true;

  // memgnn path
  std::int64_t query_layers = 2;
  std::int64_t edge_hidden_dim = 4;

  std::int64_t output_dim() const { return task == Task::regression ? 1 : class_count; }
  // Edge feature dim seen by e-GAT (learned substitute when the data has none).
  std::int64_t egat_edge_dim() const { return d_e > 0 ? d_e : edge_hidden_dim; }
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  bool is_key = false;  // keys update only at epoch end
};

struct ModelParams {
  ModelConfig config;
  std::vector<NamedTensor> tensors;

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

ModelParams init_model(const ModelConfig& cfg, Rng& rng);

// All parameters pushed onto one tape, by name.
struct ModelVars {
  std::map<std::string, Var> vars;
  const Var& get(const std::string& name) const;
};

ModelVars push_model(Tape& tape, const ModelParams& params);

struct GraphForward {
  Var logits;                    // 1 x output_dim
  std::vector<Var> assignments;  // per memory layer
};

// Forward pass for graph `b` of the batch: query network, memory stack,
// readout head. Dropout is applied only when `training` is set and the
// configured rate is positive.
GraphForward model_forward(Tape& tape, const ModelVars& vars, const ModelConfig& cfg,
                           const GraphBatch& batch, std::int64_t b, bool training = false,
                           Rng* dropout_rng = nullptr);

// --- Checkpoint --------------------------------------------------------------
// Versioned binary file: magic, JSON header (config + tensor directory),
// raw little-endian float64 payload. Round-trips bit-exactly.

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace graphmem
