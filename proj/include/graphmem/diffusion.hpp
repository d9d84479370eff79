#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graphmem/graph.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

enum class DiffusionVariant { rwr, adjacency, normalized_adjacency };
enum class DownsampleMethod { random, rwr_rank };

std::string diffusion_variant_name(DiffusionVariant v);
DiffusionVariant diffusion_variant_from_name(const std::string& name);

struct DiffusionConfig {
  double restart_prob = 0.1;
  DiffusionVariant variant = DiffusionVariant::rwr;
  bool force_power_iteration = false;  // direct dense solve otherwise (n <= 1024)
  double tol = 1e-10;
  std::int64_t max_iter = 10000;

  void validate() const;
};

// Column-stochastic normalization A * D^-1 after adding self-loops to
// isolated nodes. Requires a symmetric, zero-diagonal input.
Tensor normalize_adjacency(const Tensor& adjacency);

// Random-walk-with-restart relevance scores: column i solves
// t = p*At*t + (1-p)*e_i, i.e. t_i = (1-p)(I - p*At)^-1 e_i. Columns are
// probability vectors. Uses a dense LU solve for n <= 1024 unless
// force_power_iteration is set; power iteration runs to an L1 step below
// tol and throws ConvergenceError past max_iter.
Tensor rwr_scores(const Tensor& atilde, double restart_prob, bool force_power_iteration = false,
                  double tol = 1e-10, std::int64_t max_iter = 10000);

// The per-graph n x n matrix backing the chosen embedding variant
// (adjacency, normalized adjacency, or RWR scores). This is what the
// preprocess cache stores.
Tensor diffusion_matrix(const Graph& g, const DiffusionConfig& cfg);

// Per-node topological embedding: row i of A, At or S^T, sorted descending
// when `sort_rows` is set, right-padded with zeros to n_max.
Tensor topological_embedding(const Graph& g, const DiffusionConfig& cfg, std::int64_t n_max,
                             bool sort_rows = true);
// Same, reusing a precomputed diffusion matrix.
Tensor topological_embedding_from_matrix(const Tensor& mat, const DiffusionConfig& cfg,
                                         std::int64_t n_max, bool sort_rows = true);

// Keeps ceil(ratio * e) edges (random) or the union over nodes of each
// node's top ceil(ratio * deg) neighbors by RWR score (rwr_rank). Node set
// and surviving edge features are preserved.
Graph downsample_edges(const Graph& g, double ratio, DownsampleMethod method, std::uint64_t seed);

// --- Preprocess cache ------------------------------------------------------
// Versioned binary file holding the diffusion matrices of a whole dataset,
// keyed by dataset name, variant and restart probability (see docs/formats.md).

std::string diffusion_cache_file(const std::string& cache_dir, const std::string& dataset,
                                 const DiffusionConfig& cfg);

void write_diffusion_cache(const std::string& path, const std::string& dataset,
                           const DiffusionConfig& cfg, const std::vector<Tensor>& matrices);

// Returns the cached matrices when the file exists and its header matches;
// nullopt when the file is absent. Throws FormatError on a corrupt file or
// header mismatch.
std::optional<std::vector<Tensor>> read_diffusion_cache(const std::string& path,
                                                        const std::string& dataset,
                                                        const DiffusionConfig& cfg,
                                                        std::int64_t expected_count);

}  // namespace graphmem
