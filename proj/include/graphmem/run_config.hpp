#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graphmem {

// Run description read from a JSON config file (see docs/formats.md for the
// schema and defaults). CLI flags override file fields, file fields override
// defaults. Unknown keys are rejected.
struct RunConfig {
  // dataset
  std::string dataset_path;
  std::string dataset_format = "tu";  // tu | molecule
  std::string dataset_name;           // tu directory prefix
  std::string task = "auto";          // auto | multiclass | binary | regression
  std::int64_t max_degree_bucket = 64;

  // model
  std::string model = "gmn";  // gmn | memgnn
  std::vector<std::int64_t> key_schedule = {4, 1};
  std::int64_t heads = 1;
  std::int64_t layers = 0;  // 0 = derived from key_schedule
  std::int64_t hidden_dim = 16;
  std::int64_t query_layers = 2;
  std::int64_t edge_hidden_dim = 4;
  double tau = 1.0;
  double leaky_slope = 0.01;

  // topology
  double restart_prob = 0.1;
  std::string embedding_variant = "rwr";  // rwr | adjacency | normalized_adjacency
  bool sort_topo = true;
  std::string downsample_method = "none";  // none | random | rwr_rank
  double downsample_ratio = 1.0;
  std::int64_t n_max = 0;  // 0 = dataset maximum
  bool drop_oversized = false;

  // training
  std::int64_t batch_size = 20;
  std::int64_t max_epochs = 200;
  double lr = 1e-3;
  std::int64_t lr_decay_every = 500;
  double lr_decay = 0.5;
  double dropout = 0.0;
  double lambda = 1.0;
  std::uint64_t seed = 1;
  double val_fraction = 0.0;
  std::int64_t eval_every = 1;

  std::string output_dir = "out";

  void validate() const;
  std::string to_json_string() const;
  static RunConfig from_json_string(const std::string& text);
  static RunConfig from_file(const std::string& path);

  bool operator==(const RunConfig&) const = default;
};

}  // namespace graphmem
