#pragma once

#include <string>
#include <vector>

#include "graphmem/run_config.hpp"
#include "graphmem/trainer.hpp"

namespace graphmem {

// Shortest round-trip decimal rendering; the one formatter behind every CSV
// and log file, so identical runs produce identical bytes.
std::string format_double(double v);

// Everything a command needs: the loaded (and possibly down-sampled)
// dataset, derived model/training configs, and topological embeddings.
struct PreparedRun {
  RunConfig run;
  DatasetTable ds;
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  TopoCache topo;
};

// Loads the dataset, applies edge down-sampling and the n_max policy, infers
// dims, and builds the diffusion table (consulting `cache_dir` when set).
PreparedRun prepare_run(const RunConfig& rc, const std::string& cache_dir = "");

struct TrainOutput {
  ModelParams checkpoint;  // best-validation parameters (final when no eval ran)
  std::vector<std::string> log_lines;  // one JSON record per epoch
  FitResult fit;
};

// Trains on the whole table (with an optional validation split per
// run.val_fraction; the logged metric falls back to the training set).
TrainOutput run_train(const PreparedRun& prep);

CvResult run_cv(const PreparedRun& prep, std::int64_t k);

// Metrics CSV for a cross-validation: header fold,<metric>,<metric>_std,
// one row per fold and a final `aggregate` row carrying mean and std.
std::string metrics_csv(const CvResult& cv);

// Metric summary CSV (metric,value) for a trained model over the whole
// table; undefined metrics render as the string `undefined`.
std::string eval_csv(const Metrics& metrics, Task task);

// One CSV per memory layer: graph_id,node_id,cluster,c0..c{k-1} with the
// full soft assignment rows (unmasked nodes only). Returns the file paths.
std::vector<std::string> export_clusters(const ModelParams& params, const DatasetTable& ds,
                                         const TopoCache& topo, const std::string& out_dir);

// Computes diffusion matrices for the configured variant and writes the
// versioned cache file; returns its path.
std::string run_preprocess(const RunConfig& rc, const std::string& cache_dir);

}  // namespace graphmem
