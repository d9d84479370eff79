#pragma once

#include <cstdint>

#include "graphmem/graph.hpp"

namespace graphmem {

// Binary benchmark used by the scaled-down end-to-end checks: class 0 graphs
// are two dense 8-node communities with no edges between them, class 1
// graphs are a single dense 16-node community. Node features are one-hot
// degrees (overflow bucket last). Classes alternate, balanced.
DatasetTable synthetic_community_dataset(std::int64_t n_graphs, std::uint64_t seed,
                                         double edge_prob = 0.8,
                                         std::int64_t degree_buckets = 16);

}  // namespace graphmem
