#include "graphmem/kfold.hpp"

#include <map>

#include "graphmem/error.hpp"
#include "graphmem/rng.hpp"

namespace graphmem {

std::vector<std::int64_t> FoldSplit::fold_indices(std::int64_t fold) const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(static_cast<std::int64_t>(i));
  }
  return out;
}

std::vector<std::int64_t> FoldSplit::complement_indices(std::int64_t fold) const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(static_cast<std::int64_t>(i));
  }
  return out;
}

FoldSplit stratified_kfold(const DatasetTable& ds, std::int64_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("stratified_kfold: k must be at least 2");
  const std::int64_t n = ds.size();
  if (n < k) throw ContractError("stratified_kfold: fewer graphs than folds");

  FoldSplit split;
  split.k = k;
  split.seed = seed;
  split.assignments.assign(static_cast<std::size_t>(n), 0);
  Rng rng = Rng(seed).fork(rng_tag("kfold"));

  if (ds.task == Task::regression) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    for (std::int64_t i = 0; i < n; ++i) {
      split.assignments[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % k;
    }
    return split;
  }

  std::map<std::int64_t, std::vector<std::int64_t>> by_class;
  for (std::int64_t i = 0; i < n; ++i) {
    by_class[static_cast<std::int64_t>(ds.graphs[static_cast<std::size_t>(i)].target)].push_back(i);
  }
  for (const auto& [label, members] : by_class) {
    if (static_cast<std::int64_t>(members.size()) < k) {
      throw ContractError("stratified_kfold: class " + std::to_string(label) + " has only " +
                          std::to_string(members.size()) + " graphs for k=" + std::to_string(k));
    }
  }

  // Round-robin within each class; the rotating offset spreads the per-class
  // remainders across folds so overall fold sizes stay within one of n/k.
  std::int64_t offset = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      split.assignments[static_cast<std::size_t>(members[i])] =
          (offset + static_cast<std::int64_t>(i)) % k;
    }
    offset = (offset + static_cast<std::int64_t>(members.size())) % k;
  }
  return split;
}

}  // namespace graphmem
