#include "graphmem/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[8] = {'G', 'M', 'C', 'K', 'P', 'T', '0', '1'};

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["kind"] = model_kind_name(cfg.kind);
  j["task"] = task_name(cfg.task);
  j["key_schedule"] = cfg.key_schedule;
  j["heads"] = cfg.heads;
  j["hidden_dim"] = cfg.hidden_dim;
  j["tau"] = cfg.tau;
  j["leaky_slope"] = cfg.leaky_slope;
  j["dropout"] = cfg.dropout;
  j["d_in"] = cfg.d_in;
  j["d_e"] = cfg.d_e;
  j["class_count"] = cfg.class_count;
  j["n_max"] = cfg.n_max;
  j["embedding_variant"] = diffusion_variant_name(cfg.diffusion.variant);
  j["restart_prob"] = cfg.diffusion.restart_prob;
  j["sort_topo"] = cfg.sort_topo;
  j["query_layers"] = cfg.query_layers;
  j["edge_hidden_dim"] = cfg.edge_hidden_dim;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.kind = model_kind_from_name(j.at("kind").get<std::string>());
  cfg.task = task_from_name(j.at("task").get<std::string>());
  cfg.key_schedule = j.at("key_schedule").get<std::vector<std::int64_t>>();
  cfg.heads = j.at("heads").get<std::int64_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::int64_t>();
  cfg.tau = j.at("tau").get<double>();
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.d_in = j.at("d_in").get<std::int64_t>();
  cfg.d_e = j.at("d_e").get<std::int64_t>();
  cfg.class_count = j.at("class_count").get<std::int64_t>();
  cfg.n_max = j.at("n_max").get<std::int64_t>();
  cfg.diffusion.variant = diffusion_variant_from_name(j.at("embedding_variant").get<std::string>());
  cfg.diffusion.restart_prob = j.at("restart_prob").get<double>();
  cfg.sort_topo = j.at("sort_topo").get<bool>();
  cfg.query_layers = j.at("query_layers").get<std::int64_t>();
  cfg.edge_hidden_dim = j.at("edge_hidden_dim").get<std::int64_t>();
  return cfg;
}

}  // namespace

std::string model_kind_name(ModelKind k) {
  return k == ModelKind::gmn ? "gmn" : "memgnn";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "gmn") return ModelKind::gmn;
  if (name == "memgnn") return ModelKind::memgnn;
  throw ConfigError("unknown model kind '" + name + "'");
}

void ModelConfig::validate() const {
  if (key_schedule.empty()) throw ConfigError("key_schedule must not be empty");
  if (key_schedule.back() != 1) throw ConfigError("key_schedule must end at 1");
  for (std::size_t i = 1; i < key_schedule.size(); ++i) {
    if (key_schedule[i] >= key_schedule[i - 1]) {
      throw ConfigError("key_schedule must be strictly decreasing");
    }
  }
  if (key_schedule.front() < 1) throw ConfigError("key counts must be positive");
  if (heads < 1) throw ConfigError("heads must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (d_in < 1) throw ConfigError("d_in must be at least 1");
  if (n_max < 1) throw ConfigError("n_max must be at least 1");
  if (task == Task::regression) {
    if (class_count != 0) throw ConfigError("regression models take class_count 0");
  } else {
    if (class_count < 2) throw ConfigError("classification needs at least 2 classes");
  }
  if (kind == ModelKind::memgnn) {
    if (query_layers < 0) throw ConfigError("query_layers must be non-negative");
    if (edge_hidden_dim < 1) throw ConfigError("edge_hidden_dim must be at least 1");
  }
  diffusion.validate();
}

Tensor& ModelParams::get(const std::string& name) {
  for (NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw ContractError("model parameter '" + name + "' not found");
}

const Tensor& ModelParams::get(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw ContractError("model parameter '" + name + "' not found");
}

bool ModelParams::has(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams params;
  params.config = cfg;

  if (cfg.kind == ModelKind::gmn) {
    GmnQueryParams q = init_gmn_query(cfg.n_max, cfg.d_in, cfg.hidden_dim, rng);
    params.tensors.push_back({"gmn.w0", std::move(q.w0), false});
    params.tensors.push_back({"gmn.w1", std::move(q.w1), false});
  } else {
    EgatParams q = init_egat(cfg.d_in, cfg.hidden_dim, cfg.egat_edge_dim(), cfg.edge_hidden_dim,
                             cfg.query_layers, cfg.d_e > 0, rng);
    params.tensors.push_back({"egat.input_proj", std::move(q.input_proj), false});
    params.tensors.push_back({"egat.self_edge", std::move(q.self_edge), false});
    params.tensors.push_back({"egat.default_edge", std::move(q.default_edge), false});
    for (std::size_t l = 0; l < q.layers.size(); ++l) {
      const std::string prefix = "egat.l" + std::to_string(l) + ".";
      params.tensors.push_back({prefix + "w_node", std::move(q.layers[l].w_node), false});
      params.tensors.push_back({prefix + "w_edge", std::move(q.layers[l].w_edge), false});
      params.tensors.push_back({prefix + "attn", std::move(q.layers[l].attn), false});
    }
  }

  for (std::size_t l = 0; l < cfg.key_schedule.size(); ++l) {
    MemoryLayerParams layer = init_memory_layer(cfg.heads, cfg.key_schedule[l], cfg.hidden_dim,
                                                cfg.hidden_dim, cfg.tau, rng);
    const std::string prefix = "mem" + std::to_string(l) + ".";
    params.tensors.push_back({prefix + "keys", std::move(layer.keys), true});
    params.tensors.push_back({prefix + "head_weight", std::move(layer.head_mix_weight), false});
    params.tensors.push_back({prefix + "head_bias", std::move(layer.head_mix_bias), false});
    params.tensors.push_back({prefix + "proj", std::move(layer.proj_weight), false});
  }

  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  Tensor head_w({cfg.hidden_dim, cfg.output_dim()});
  for (auto& v : head_w.data()) v = rng.uniform(-bound, bound);
  Tensor head_b({1, cfg.output_dim()});
  params.tensors.push_back({"head.weight", std::move(head_w), false});
  params.tensors.push_back({"head.bias", std::move(head_b), false});
  return params;
}

const Var& ModelVars::get(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw ContractError("model var '" + name + "' not found");
  return it->second;
}

ModelVars push_model(Tape& tape, const ModelParams& params) {
  ModelVars out;
  for (const NamedTensor& t : params.tensors) {
    out.vars.emplace(t.name, tape.param(t.value));
  }
  return out;
}

GraphForward model_forward(Tape& tape, const ModelVars& vars, const ModelConfig& cfg,
                           const GraphBatch& batch, std::int64_t b, bool training,
                           Rng* dropout_rng) {
  const bool use_dropout = training && cfg.dropout > 0.0;
  if (use_dropout && dropout_rng == nullptr) {
    throw ContractError("model_forward: dropout requires an rng in training mode");
  }

  Var x = tape.constant(batch.node_feats_of(b));
  Var q0;
  if (cfg.kind == ModelKind::gmn) {
    GmnQueryVars q{vars.get("gmn.w0"), vars.get("gmn.w1")};
    q0 = gmn_query(tape.constant(batch.topo_of(b)), x, q, cfg.leaky_slope);
  } else {
    EgatVars q;
    q.input_proj = vars.get("egat.input_proj");
    q.self_edge = vars.get("egat.self_edge");
    q.default_edge = vars.get("egat.default_edge");
    q.data_has_edge_features = cfg.d_e > 0;
    for (std::int64_t l = 0; l < cfg.query_layers; ++l) {
      const std::string prefix = "egat.l" + std::to_string(l) + ".";
      q.layers.push_back(EgatLayerVars{vars.get(prefix + "w_node"), vars.get(prefix + "w_edge"),
                                       vars.get(prefix + "attn")});
    }
    q0 = memgnn_query(x, batch.edges[static_cast<std::size_t>(b)],
                      batch.true_n[static_cast<std::size_t>(b)], q, cfg.leaky_slope);
  }
  if (use_dropout) q0 = dropout(q0, cfg.dropout, *dropout_rng);

  Tensor mask({batch.n_max});
  for (std::int64_t i = 0; i < batch.n_max; ++i) mask.at(i) = batch.node_mask.at(b * batch.n_max + i);

  const std::size_t num_layers = cfg.key_schedule.size();
  std::vector<MemoryLayerVars> layers;
  layers.reserve(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string prefix = "mem" + std::to_string(l) + ".";
    MemoryLayerVars layer;
    layer.keys = vars.get(prefix + "keys");
    layer.head_mix_weight = vars.get(prefix + "head_weight");
    layer.head_mix_bias = vars.get(prefix + "head_bias");
    layer.proj_weight = vars.get(prefix + "proj");
    layer.temperature = cfg.tau;
    layers.push_back(layer);
  }

  GraphForward out;
  Var q = q0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Tensor* layer_mask = l == 0 ? &mask : nullptr;
    MemoryLayerOutput layer_out = memory_layer_forward(q, layers[l], layer_mask, cfg.leaky_slope);
    out.assignments.push_back(layer_out.assignment);
    q = layer_out.queries_next;
    if (use_dropout && l + 1 < num_layers) q = dropout(q, cfg.dropout, *dropout_rng);
  }
  if (layers.back().keys.value().dim(1) != 1) {
    throw ConfigError("model_forward: key schedule must end at a single key");
  }

  out.logits = add(matmul(q, vars.get("head.weight")), vars.get("head.bias"));
  return out;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  json header;
  header["version"] = 1;
  header["config"] = config_to_json(params.config);
  json tensors = json::array();
  for (const NamedTensor& t : params.tensors) {
    json entry;
    entry["name"] = t.name;
    entry["shape"] = t.value.shape();
    entry["is_key"] = t.is_key;
    tensors.push_back(std::move(entry));
  }
  header["tensors"] = std::move(tensors);
  const std::string hs = header.dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const NamedTensor& t : params.tensors) {
    out.write(reinterpret_cast<const char*>(t.value.data().data()),
              static_cast<std::streamsize>(sizeof(double) * t.value.data().size()));
  }
  if (!out) throw FormatError("short write on checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError(path + ": not a checkpoint file");
  }
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw FormatError(path + ": truncated header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  }
  if (header.value("version", 0) != 1) throw FormatError(path + ": unsupported checkpoint version");

  ModelParams params;
  params.config = config_from_json(header.at("config"));
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.is_key = entry.at("is_key").get<bool>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    t.value = Tensor(shape);
    in.read(reinterpret_cast<char*>(t.value.data().data()),
            static_cast<std::streamsize>(sizeof(double) * t.value.data().size()));
    if (!in) throw FormatError(path + ": truncated tensor data for " + t.name);
    params.tensors.push_back(std::move(t));
  }
  return params;
}

}  // namespace graphmem
