#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "graphmem/batch.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/kfold.hpp"
#include "graphmem/losses.hpp"
#include "graphmem/metrics.hpp"
#include "graphmem/model.hpp"
#include "graphmem/optimizer.hpp"

namespace graphmem {

struct TrainConfig {
  std::int64_t batch_size = 20;
  std::int64_t max_epochs = 2000;
  double lr = 1e-3;
  std::int64_t lr_decay_every = 500;
  double lr_decay = 0.5;
  // Weight of the supervised term in batch steps. The default binary
  // schedule keeps it at 1; the epoch-end step always optimizes pure KL.
  double lambda = 1.0;
  std::uint64_t seed = 1;
  bool kl_epoch_step = true;
  std::int64_t eval_every = 1;

  void validate() const;
  double lr_at_epoch(std::int64_t epoch) const;
};

// Per-dataset-graph topological embeddings (gmn); empty for memgnn.
struct TopoCache {
  std::vector<Tensor> rows;  // indexed by dataset index, n x n_max each
  const std::vector<Tensor>* ptr() const { return rows.empty() ? nullptr : &rows; }
};

// Builds the gmn topological-embedding table, consulting the on-disk
// diffusion cache under `cache_dir` when one exists for this key.
TopoCache build_topo_cache(const DatasetTable& ds, const ModelConfig& cfg,
                           const std::string& cache_dir = "");

struct BatchLossResult {
  Var total;
  double sup = 0.0;
  std::vector<double> kl_per_layer;
  // The (detached) target distributions used for the KL terms, one per
  // graph per layer; reusable to pin the loss for gradient checking.
  std::vector<std::vector<Tensor>> targets;
  std::vector<GraphForward> forwards;
};

// Assembles the training objective for one batch on the tape:
// lambda * supervised + (1 - lambda) * sum_l KL_l, each term averaged over
// the batch. KL terms use only unmasked assignment rows and treat the
// target distribution as a constant (recomputed here unless `pinned`
// provides it).
BatchLossResult batch_loss(Tape& tape, const ModelVars& vars, const ModelConfig& cfg,
                           const GraphBatch& batch, double lambda, bool training = false,
                           Rng* dropout_rng = nullptr,
                           const std::vector<std::vector<Tensor>>* pinned = nullptr);

struct EpochReport {
  std::vector<double> batch_sup;  // supervised loss per batch step
  double sup_mean = 0.0;
  double kl = 0.0;  // epoch-end clustering loss (0 when the step is disabled)
};

using BatchObserver = std::function<void(const ModelParams&, std::int64_t batch_index)>;

// One epoch of the two-timescale schedule: per batch a supervised step that
// leaves keys untouched, then (unless disabled) a single epoch-end step on
// the accumulated KL gradient that also moves the keys.
EpochReport train_epoch(ModelParams& params, const DatasetTable& ds,
                        const std::vector<std::int64_t>& train_idx, AdamOptimizer& opt,
                        const TrainConfig& cfg, const TopoCache& topo, std::int64_t epoch,
                        const BatchObserver* after_batch = nullptr);

// Deterministic evaluation (dropout off): task metrics over the given rows.
Metrics evaluate_model(const ModelParams& params, const DatasetTable& ds,
                       const std::vector<std::int64_t>& indices, const TopoCache& topo);

struct FitResult {
  std::vector<EpochReport> epochs;
  std::vector<double> val_metric;  // NaN on epochs without evaluation
  double best_val = 0.0;
  std::int64_t best_epoch = -1;
  ModelParams best_params;  // parameters at the best validation epoch
};

FitResult fit(ModelParams& params, const DatasetTable& ds,
              const std::vector<std::int64_t>& train_idx,
              const std::vector<std::int64_t>& val_idx, const TrainConfig& cfg,
              const TopoCache& topo);

struct CvResult {
  std::string metric_name;           // accuracy or rmse
  std::vector<double> fold_metrics;  // best validation metric per fold
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

// K-fold cross-validation; fold seeds derive deterministically from
// cfg.seed, training k models from scratch.
CvResult cross_validate(const DatasetTable& ds, const ModelConfig& model_cfg,
                        const TrainConfig& cfg, std::int64_t k, const TopoCache& topo);

}  // namespace graphmem
