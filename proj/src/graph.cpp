#include "graphmem/graph.hpp"

#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

std::string task_name(Task t) {
  switch (t) {
    case Task::multiclass: return "multiclass";
    case Task::binary: return "binary";
    case Task::regression: return "regression";
  }
  return "unknown";
}

Task task_from_name(const std::string& name) {
  if (name == "multiclass") return Task::multiclass;
  if (name == "binary") return Task::binary;
  if (name == "regression") return Task::regression;
  throw ConfigError("unknown task '" + name + "'");
}

bool Graph::operator==(const Graph& other) const {
  return n == other.n && adjacency.shape() == other.adjacency.shape() &&
         adjacency.data() == other.adjacency.data() &&
         node_features.shape() == other.node_features.shape() &&
         node_features.data() == other.node_features.data() && edges == other.edges &&
         edge_features.shape() == other.edge_features.shape() &&
         edge_features.data() == other.edge_features.data() && target == other.target;
}

std::int64_t DatasetTable::max_nodes() const {
  std::int64_t m = 0;
  for (const Graph& g : graphs) m = std::max(m, g.n);
  return m;
}

double DatasetTable::mean_nodes() const {
  if (graphs.empty()) return 0.0;
  double s = 0.0;
  for (const Graph& g : graphs) s += static_cast<double>(g.n);
  return s / static_cast<double>(graphs.size());
}

bool DatasetTable::operator==(const DatasetTable& other) const {
  return graphs == other.graphs && task == other.task && d_in == other.d_in &&
         d_e == other.d_e && class_count == other.class_count;
}

void validate_graph(const Graph& g, std::int64_t index) {
  const std::string where = "graph " + std::to_string(index);
  if (g.adjacency.rank() != 2 || g.adjacency.rows() != g.n || g.adjacency.cols() != g.n) {
    throw DataError(where + ": adjacency shape does not match node count");
  }
  if (g.node_features.rank() != 2 || g.node_features.rows() != g.n) {
    throw DataError(where + ": node feature row count does not match node count");
  }
  for (std::int64_t i = 0; i < g.n; ++i) {
    if (g.adjacency.at(i, i) != 0.0) throw DataError(where + ": nonzero adjacency diagonal");
    for (std::int64_t j = i + 1; j < g.n; ++j) {
      if (g.adjacency.at(i, j) != g.adjacency.at(j, i)) {
        throw DataError(where + ": adjacency not symmetric");
      }
    }
  }
  for (const EdgePair& e : g.edges) {
    if (e.u < 0 || e.v < 0 || e.u >= g.n || e.v >= g.n || e.u >= e.v) {
      throw DataError(where + ": edge list entry references invalid node indices");
    }
  }
  if (g.edge_features.numel() > 0 &&
      g.edge_features.rows() != static_cast<std::int64_t>(g.edges.size())) {
    throw DataError(where + ": edge feature rows not aligned with edge list");
  }
}

}  // namespace graphmem
