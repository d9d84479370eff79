#include "graphmem/batch.hpp"

#include "graphmem/error.hpp"

namespace graphmem {

Tensor GraphBatch::node_feats_of(std::int64_t b) const {
  const std::int64_t d = node_feats.dim(2);
  Tensor out({n_max, d});
  for (std::int64_t i = 0; i < n_max; ++i)
    for (std::int64_t c = 0; c < d; ++c) out.at(i, c) = node_feats.at(b, i, c);
  return out;
}

Tensor GraphBatch::topo_of(std::int64_t b) const {
  if (topo_embed.numel() == 0) throw ContractError("topo_of: batch has no topological embedding");
  Tensor out({n_max, n_max});
  for (std::int64_t i = 0; i < n_max; ++i)
    for (std::int64_t c = 0; c < n_max; ++c) out.at(i, c) = topo_embed.at(b, i, c);
  return out;
}

std::vector<std::int64_t> GraphBatch::real_node_list(std::int64_t b) const {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(true_n[static_cast<std::size_t>(b)]));
  for (std::int64_t i = 0; i < true_n[static_cast<std::size_t>(b)]; ++i) out.push_back(i);
  return out;
}

GraphBatch batch_graphs(const DatasetTable& ds, const std::vector<std::int64_t>& indices,
                        std::int64_t n_max, BatchMode mode,
                        const std::vector<Tensor>* topo_rows) {
  const std::int64_t b = static_cast<std::int64_t>(indices.size());
  if (b == 0) throw ContractError("batch_graphs: empty index list");
  for (std::int64_t i = 0; i < b; ++i) {
    const Graph& g = ds.graphs[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    if (g.n > n_max) {
      throw ContractError("batch_graphs: graph " +
                          std::to_string(indices[static_cast<std::size_t>(i)]) + " has " +
                          std::to_string(g.n) + " nodes, exceeding n_max=" +
                          std::to_string(n_max));
    }
  }
  if (mode == BatchMode::gmn && topo_rows == nullptr) {
    throw ContractError("batch_graphs: gmn mode requires topological embeddings");
  }

  GraphBatch batch;
  batch.size = b;
  batch.n_max = n_max;
  batch.dataset_indices = indices;
  batch.node_feats = Tensor({b, n_max, ds.d_in});
  batch.adjacency = Tensor({b, n_max, n_max});
  batch.node_mask = Tensor({b, n_max});
  batch.targets = Tensor({b});
  if (mode == BatchMode::gmn) batch.topo_embed = Tensor({b, n_max, n_max});

  for (std::int64_t bi = 0; bi < b; ++bi) {
    const std::int64_t gi = indices[static_cast<std::size_t>(bi)];
    const Graph& g = ds.graphs[static_cast<std::size_t>(gi)];
    batch.true_n.push_back(g.n);
    batch.targets.at(bi) = g.target;
    for (std::int64_t i = 0; i < g.n; ++i) {
      batch.node_mask.at(bi * n_max + i) = 1.0;
      for (std::int64_t c = 0; c < ds.d_in; ++c) {
        batch.node_feats.at(bi, i, c) = g.node_features.at(i, c);
      }
      for (std::int64_t j = 0; j < g.n; ++j) {
        batch.adjacency.at(bi, i, j) = g.adjacency.at(i, j);
      }
    }
    if (mode == BatchMode::gmn) {
      const Tensor& topo = (*topo_rows)[static_cast<std::size_t>(gi)];
      if (topo.rows() != g.n || topo.cols() != n_max) {
        throw ContractError("batch_graphs: topological embedding for graph " +
                            std::to_string(gi) + " has shape " + topo.shape_str() +
                            ", expected [" + std::to_string(g.n) + "x" +
                            std::to_string(n_max) + "]");
      }
      for (std::int64_t i = 0; i < g.n; ++i)
        for (std::int64_t c = 0; c < n_max; ++c) batch.topo_embed.at(bi, i, c) = topo.at(i, c);
    } else {
      DirectedEdges de;
      const std::int64_t e = static_cast<std::int64_t>(g.edges.size());
      de.src.reserve(static_cast<std::size_t>(2 * e));
      de.dst.reserve(static_cast<std::size_t>(2 * e));
      if (ds.d_e > 0) de.feats = Tensor({2 * e, ds.d_e});
      for (std::int64_t ei = 0; ei < e; ++ei) {
        const EdgePair& edge = g.edges[static_cast<std::size_t>(ei)];
        de.src.push_back(edge.u);
        de.dst.push_back(edge.v);
        de.src.push_back(edge.v);
        de.dst.push_back(edge.u);
        if (ds.d_e > 0) {
          for (std::int64_t c = 0; c < ds.d_e; ++c) {
            const double f = g.edge_features.at(ei, c);
            de.feats.at(2 * ei, c) = f;
            de.feats.at(2 * ei + 1, c) = f;
          }
        }
      }
      batch.edges.push_back(std::move(de));
    }
  }
  return batch;
}

}  // namespace graphmem
