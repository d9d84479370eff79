#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphmem/tensor.hpp"

namespace graphmem {

enum class Task { multiclass, binary, regression };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

// One undirected edge, stored once with u < v.
struct EdgePair {
  std::int64_t u = 0;
  std::int64_t v = 0;
  bool operator==(const EdgePair&) const = default;
};

// One labeled graph. Adjacency is symmetric with a zero diagonal as stored;
// self-loops are a downstream concern.
struct Graph {
  std::int64_t n = 0;
  Tensor adjacency;      // n x n, entries in {0, 1}
  Tensor node_features;  // n x d_in
  std::vector<EdgePair> edges;
  Tensor edge_features;  // e x d_e, empty tensor when the dataset has none
  double target = 0.0;   // class id for classification, scalar for regression

  bool operator==(const Graph& other) const;
};

struct DatasetTable {
  std::vector<Graph> graphs;
  Task task = Task::multiclass;
  std::int64_t d_in = 0;
  std::int64_t d_e = 0;          // 0 when no edge features
  std::int64_t class_count = 0;  // 0 for regression
  std::string name;

  std::int64_t size() const { return static_cast<std::int64_t>(graphs.size()); }
  std::int64_t max_nodes() const;
  double mean_nodes() const;

  bool operator==(const DatasetTable& other) const;
};

// Checks the stored-graph invariants (symmetry, zero diagonal, aligned edge
// list); throws DataError on violation. Loaders call this before returning.
void validate_graph(const Graph& g, std::int64_t index);

}  // namespace graphmem
