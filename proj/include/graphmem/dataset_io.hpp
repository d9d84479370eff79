#pragma once

#include <string>

#include "graphmem/graph.hpp"

namespace graphmem {

struct TuLoadOptions {
  // Degree one-hot bucket count used when the dataset ships neither node
  // attributes nor node labels; the last bucket absorbs overflow degrees.
  std::int64_t max_degree_bucket = 64;
};

// Loads a TU-format dataset from `dir_path`. Expects `<name>_A.txt`
// (comma-separated 1-indexed edge pairs), `<name>_graph_indicator.txt` and
// `<name>_graph_labels.txt`; uses `<name>_node_attributes.txt` or
// `<name>_node_labels.txt` for features when present. Graph labels are
// remapped to contiguous 0-based ids.
DatasetTable load_tu_dataset(const std::string& dir_path, const std::string& name,
                             const TuLoadOptions& options = {});

// Loads a line-delimited molecular-graph file: one JSON record per line with
// fields `nodes` (list of d_in-float vectors), `edges` (list of
// [i, j, d_e-float vector], one entry per undirected pair) and `target`.
DatasetTable load_molecule_dataset(const std::string& file_path);

// Writes a dataset in the molecule format; inverse of load_molecule_dataset.
void save_molecule_dataset(const DatasetTable& ds, const std::string& file_path);

}  // namespace graphmem
