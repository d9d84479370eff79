#include "graphmem/query_networks.hpp"

#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {

Tensor uniform_init(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void GmnQueryParams::validate() const {
  if (w0.rank() != 2 || w1.rank() != 2) throw ConfigError("gmn query weights must be matrices");
  if (w1.rows() != 2 * w0.cols()) {
    throw ConfigError("gmn query: W1 must have 2*d_in rows to accept [S W0 || X]");
  }
}

GmnQueryParams init_gmn_query(std::int64_t n_max, std::int64_t d_in, std::int64_t d0, Rng& rng) {
  GmnQueryParams p;
  p.w0 = uniform_init({n_max, d_in}, n_max, rng);
  p.w1 = uniform_init({2 * d_in, d0}, 2 * d_in, rng);
  p.validate();
  return p;
}

GmnQueryVars push_gmn_query(Tape& tape, const GmnQueryParams& params) {
  return GmnQueryVars{tape.param(params.w0), tape.param(params.w1)};
}

Var gmn_query(const Var& topo, const Var& x, const GmnQueryVars& vars, double leaky_slope) {
  if (topo.value().cols() != vars.w0.value().rows()) {
    throw ConfigError("gmn_query: embedding width " + std::to_string(topo.value().cols()) +
                      " does not match trained W0 rows " +
                      std::to_string(vars.w0.value().rows()));
  }
  if (x.value().cols() != vars.w0.value().cols()) {
    throw ConfigError("gmn_query: node feature dim does not match W0 columns");
  }
  Var topo_proj = leaky_relu(matmul(topo, vars.w0), leaky_slope);
  Var fused = concat_cols(topo_proj, x);
  return leaky_relu(matmul(fused, vars.w1), leaky_slope);
}

void EgatParams::validate() const {
  if (input_proj.rank() != 2) throw ConfigError("egat input projection must be a matrix");
  const std::int64_t d0 = input_proj.cols();
  const std::int64_t d_e = self_edge.cols();
  for (const EgatLayerParams& l : layers) {
    if (l.w_node.rows() != d0 || l.w_node.cols() != d0) {
      throw ConfigError("egat node transform must be d0 x d0");
    }
    if (l.w_edge.rows() != d_e) throw ConfigError("egat edge transform rows must equal d_e");
    if (l.attn.rows() != 2 * d0 + l.w_edge.cols() || l.attn.cols() != 1) {
      throw ConfigError("egat attention vector must have length 2*d0 + d_e_hidden");
    }
  }
}

EgatParams init_egat(std::int64_t d_in, std::int64_t d0, std::int64_t d_e,
                     std::int64_t d_e_hidden, std::int64_t num_layers,
                     bool data_has_edge_features, Rng& rng) {
  if (d_e < 1) throw ConfigError("init_egat: edge feature dim must be positive");
  EgatParams p;
  p.data_has_edge_features = data_has_edge_features;
  p.input_proj = uniform_init({d_in, d0}, d_in, rng);
  p.self_edge = uniform_init({1, d_e}, d_e, rng);
  p.default_edge = uniform_init({1, d_e}, d_e, rng);
  for (std::int64_t l = 0; l < num_layers; ++l) {
    EgatLayerParams layer;
    layer.w_node = uniform_init({d0, d0}, d0, rng);
    layer.w_edge = uniform_init({d_e, d_e_hidden}, d_e, rng);
    layer.attn = uniform_init({2 * d0 + d_e_hidden, 1}, 2 * d0 + d_e_hidden, rng);
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

EgatVars push_egat(Tape& tape, const EgatParams& params) {
  EgatVars vars;
  vars.input_proj = tape.param(params.input_proj);
  vars.self_edge = tape.param(params.self_edge);
  vars.default_edge = tape.param(params.default_edge);
  vars.data_has_edge_features = params.data_has_edge_features;
  for (const EgatLayerParams& l : params.layers) {
    vars.layers.push_back(
        EgatLayerVars{tape.param(l.w_node), tape.param(l.w_edge), tape.param(l.attn)});
  }
  return vars;
}

EgatEdges build_egat_edges(Tape& tape, const DirectedEdges& graph_edges,
                           std::int64_t real_nodes, const EgatVars& vars) {
  const std::int64_t m = static_cast<std::int64_t>(graph_edges.src.size());
  EgatEdges out;
  out.src = graph_edges.src;
  out.dst = graph_edges.dst;
  for (std::int64_t i = 0; i < real_nodes; ++i) {
    out.src.push_back(i);
    out.dst.push_back(i);
  }
  std::vector<Var> feat_parts;
  if (m > 0) {
    if (vars.data_has_edge_features) {
      if (graph_edges.feats.numel() == 0) {
        throw DataError("egat: edge feature row missing for listed neighbors");
      }
      feat_parts.push_back(tape.constant(graph_edges.feats));
    } else {
      feat_parts.push_back(tile_rows(vars.default_edge, m));
    }
  }
  feat_parts.push_back(tile_rows(vars.self_edge, real_nodes));
  out.feats = feat_parts.size() == 1 ? feat_parts[0] : concat_rows(feat_parts);
  return out;
}

Var egat_attention(const Var& h, const EgatEdges& edges, const EgatLayerVars& layer,
                   double leaky_slope) {
  Var hn = matmul(h, layer.w_node);
  Var he = matmul(edges.feats, layer.w_edge);
  Var att_in = concat_cols(concat_cols(take_rows(hn, edges.src), take_rows(hn, edges.dst)), he);
  Var logits = leaky_relu(matmul(att_in, layer.attn), leaky_slope);
  return segment_softmax(logits, edges.src);
}

Var egat_layer(const Var& h, const EgatEdges& edges, const EgatLayerVars& layer,
               double leaky_slope) {
  Var hn = matmul(h, layer.w_node);
  Var he = matmul(edges.feats, layer.w_edge);
  Var att_in = concat_cols(concat_cols(take_rows(hn, edges.src), take_rows(hn, edges.dst)), he);
  Var logits = leaky_relu(matmul(att_in, layer.attn), leaky_slope);
  Var alpha = segment_softmax(logits, edges.src);
  Var messages = scale_rows(take_rows(hn, edges.dst), alpha);
  Var pooled = segment_sum(messages, edges.src, h.value().rows());
  return leaky_relu(pooled, leaky_slope);
}

Var memgnn_query(const Var& x, const DirectedEdges& graph_edges, std::int64_t real_nodes,
                 const EgatVars& vars, double leaky_slope) {
  Var h = matmul(x, vars.input_proj);
  if (vars.layers.empty()) return h;
  Tape& tape = *x.tape();
  EgatEdges edges = build_egat_edges(tape, graph_edges, real_nodes, vars);
  for (const EgatLayerVars& layer : vars.layers) {
    h = add(egat_layer(h, edges, layer, leaky_slope), h);  // skip connection
  }
  return h;
}

}  // namespace graphmem
