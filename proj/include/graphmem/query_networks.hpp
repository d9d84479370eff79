#pragma once

#include <cstdint>
#include <vector>

#include "graphmem/batch.hpp"
#include "graphmem/rng.hpp"
#include "graphmem/tape.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

// --- GMN query network -------------------------------------------------------
// Q0 = LeakyReLU([LeakyReLU(S W0) || X] W1), no message passing. W0 is sized
// for the padded embedding width n_max, so a single trainable matrix serves
// every graph of the dataset.

struct GmnQueryParams {
  Tensor w0;  // n_max x d_in
  Tensor w1;  // 2*d_in x d0
  void validate() const;
};

GmnQueryParams init_gmn_query(std::int64_t n_max, std::int64_t d_in, std::int64_t d0, Rng& rng);

struct GmnQueryVars {
  Var w0;
  Var w1;
};

GmnQueryVars push_gmn_query(Tape& tape, const GmnQueryParams& params);

// topo: n x n_max sorted, padded embedding rows; x: n x d_in node features.
Var gmn_query(const Var& topo, const Var& x, const GmnQueryVars& vars, double leaky_slope);

// --- MemGNN query network (e-GAT) --------------------------------------------

struct EgatLayerParams {
  Tensor w_node;  // d0 x d0
  Tensor w_edge;  // d_e x d_e_hidden
  Tensor attn;    // (2*d0 + d_e_hidden) x 1
};

struct EgatParams {
  Tensor input_proj;  // d_in x d0
  std::vector<EgatLayerParams> layers;
  Tensor self_edge;     // 1 x d_e, learned feature for self-loops
  Tensor default_edge;  // 1 x d_e, learned substitute when the data has none
  bool data_has_edge_features = true;
  void validate() const;
};

EgatParams init_egat(std::int64_t d_in, std::int64_t d0, std::int64_t d_e,
                     std::int64_t d_e_hidden, std::int64_t num_layers,
                     bool data_has_edge_features, Rng& rng);

struct EgatLayerVars {
  Var w_node;
  Var w_edge;
  Var attn;
};

struct EgatVars {
  Var input_proj;
  std::vector<EgatLayerVars> layers;
  Var self_edge;
  Var default_edge;
  bool data_has_edge_features = true;
};

EgatVars push_egat(Tape& tape, const EgatParams& params);

// Directed edge structure with self-loops appended, ready for attention.
struct EgatEdges {
  std::vector<std::int64_t> src;
  std::vector<std::int64_t> dst;
  Var feats;  // (edges + self loops) x d_e on the tape
};

// Assembles src/dst/features for one graph: every stored directed edge plus
// one self-loop per real node (learned self-edge feature row). When the
// dataset has no edge features every real edge shares the learned default
// feature row.
EgatEdges build_egat_edges(Tape& tape, const DirectedEdges& graph_edges,
                           std::int64_t real_nodes, const EgatVars& vars);

// Attention weights per directed edge, softmax over each source node's
// neighborhood: alpha = softmax_j exp(LeakyReLU(attn^T [Wn h_i || Wn h_j || We e_ij])).
Var egat_attention(const Var& h, const EgatEdges& edges, const EgatLayerVars& layer,
                   double leaky_slope);

// h'_i = LeakyReLU(sum_j alpha_ij * Wn h_j).
Var egat_layer(const Var& h, const EgatEdges& edges, const EgatLayerVars& layer,
               double leaky_slope);

// Full query network: input projection, then `layers` e-GAT layers with skip
// connections. With zero layers this reduces to the input projection.
Var memgnn_query(const Var& x, const DirectedEdges& graph_edges, std::int64_t real_nodes,
                 const EgatVars& vars, double leaky_slope);

}  // namespace graphmem
