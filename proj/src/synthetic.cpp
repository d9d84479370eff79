#include "graphmem/synthetic.hpp"

#include <algorithm>

#include "graphmem/error.hpp"
#include "graphmem/rng.hpp"

namespace graphmem {

DatasetTable synthetic_community_dataset(std::int64_t n_graphs, std::uint64_t seed,
                                         double edge_prob, std::int64_t degree_buckets) {
  if (n_graphs < 2) throw ContractError("synthetic_community_dataset: need at least 2 graphs");
  Rng rng = Rng(seed).fork(rng_tag("synthetic"));

  DatasetTable ds;
  ds.name = "synthetic_communities";
  ds.task = Task::binary;
  ds.class_count = 2;
  ds.d_in = degree_buckets;
  ds.d_e = 0;

  const std::int64_t n = 16;
  for (std::int64_t gi = 0; gi < n_graphs; ++gi) {
    const std::int64_t label = gi % 2;
    Graph g;
    g.n = n;
    g.target = static_cast<double>(label);
    g.adjacency = Tensor({n, n});
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = i + 1; j < n; ++j) {
        const bool same_block = label == 1 || (i < 8) == (j < 8);
        if (same_block && rng.uniform() < edge_prob) {
          g.adjacency.at(i, j) = 1.0;
          g.adjacency.at(j, i) = 1.0;
          g.edges.push_back({i, j});
        }
      }
    }
    g.node_features = Tensor({n, degree_buckets});
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t deg = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        if (g.adjacency.at(i, j) != 0.0) ++deg;
      }
      g.node_features.at(i, std::min(deg, degree_buckets - 1)) = 1.0;
    }
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

}  // namespace graphmem
