#pragma once

#include <cstdint>
#include <vector>

#include "graphmem/graph.hpp"

namespace graphmem {

struct FoldSplit {
  std::int64_t k = 0;
  std::vector<std::int64_t> assignments;  // fold index per graph
  std::uint64_t seed = 0;

  std::vector<std::int64_t> fold_indices(std::int64_t fold) const;
  std::vector<std::int64_t> complement_indices(std::int64_t fold) const;
};

// Deterministic k-fold split. Stratified per class for classification
// (per-fold class counts within one graph of the even split), plain
// shuffled split for regression.
FoldSplit stratified_kfold(const DatasetTable& ds, std::int64_t k, std::uint64_t seed);

}  // namespace graphmem
