#pragma once

#include <cstdint>
#include <vector>

#include "graphmem/graph.hpp"

namespace graphmem {

enum class BatchMode { gmn, memgnn };

// Directed edge structure for one graph in a MemGNN batch. Real undirected
// edges appear in both directions; self-loops are added by the query network.
struct DirectedEdges {
  std::vector<std::int64_t> src;
  std::vector<std::int64_t> dst;
  Tensor feats;  // (2e) x d_e rows aligned with src/dst; empty when d_e == 0
};

// Fixed-size padded minibatch. Padded node rows are exactly zero and the
// node mask marks the true nodes.
struct GraphBatch {
  std::int64_t size = 0;
  std::int64_t n_max = 0;
  Tensor node_feats;  // B x n_max x d_in
  Tensor adjacency;   // B x n_max x n_max
  Tensor node_mask;   // B x n_max, entries in {0, 1}
  Tensor topo_embed;  // B x n_max x n_max (gmn mode), empty otherwise
  std::vector<DirectedEdges> edges;  // memgnn mode, one entry per graph
  Tensor targets;     // B
  std::vector<std::int64_t> true_n;
  std::vector<std::int64_t> dataset_indices;

  // Padded row slices for graph b as rank-2 tensors.
  Tensor node_feats_of(std::int64_t b) const;
  Tensor topo_of(std::int64_t b) const;
  std::vector<std::int64_t> real_node_list(std::int64_t b) const;
};

// Builds a padded batch for the given dataset rows. In gmn mode,
// `topo_rows` must hold one n x n_max topological-embedding matrix per
// dataset graph (indexed by dataset index).
GraphBatch batch_graphs(const DatasetTable& ds, const std::vector<std::int64_t>& indices,
                        std::int64_t n_max, BatchMode mode,
                        const std::vector<Tensor>* topo_rows = nullptr);

}  // namespace graphmem
