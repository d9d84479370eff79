#include "graphmem/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphmem/diffusion.hpp"
#include "graphmem/error.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/model.hpp"

namespace graphmem {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("unknown config field '" + where + it.key() + "'");
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_path.empty()) throw ConfigError("dataset.path must be set");
  if (dataset_format != "tu" && dataset_format != "molecule") {
    throw ConfigError("dataset.format must be 'tu' or 'molecule'");
  }
  if (dataset_format == "tu" && dataset_name.empty()) {
    throw ConfigError("dataset.name must be set for the tu format");
  }
  if (task != "auto") task_from_name(task);          // throws on bad name
  model_kind_from_name(model);                       // throws on bad name
  diffusion_variant_from_name(embedding_variant);    // throws on bad name
  if (key_schedule.empty() || key_schedule.back() != 1) {
    throw ConfigError("key_schedule must end at 1");
  }
  for (std::size_t i = 1; i < key_schedule.size(); ++i) {
    if (key_schedule[i] >= key_schedule[i - 1]) {
      throw ConfigError("key_schedule must be strictly decreasing");
    }
  }
  if (layers != 0 && layers != static_cast<std::int64_t>(key_schedule.size())) {
    throw ConfigError("layers must equal the key_schedule length");
  }
  if (heads < 1) throw ConfigError("heads must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (query_layers < 0) throw ConfigError("query_layers must be non-negative");
  if (edge_hidden_dim < 1) throw ConfigError("edge_hidden_dim must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (!(restart_prob > 0.0 && restart_prob < 1.0)) {
    throw ConfigError("restart_prob must lie in (0, 1)");
  }
  if (downsample_method != "none" && downsample_method != "random" &&
      downsample_method != "rwr_rank") {
    throw ConfigError("downsample.method must be none, random or rwr_rank");
  }
  if (downsample_method != "none" && !(downsample_ratio > 0.0 && downsample_ratio <= 1.0)) {
    throw ConfigError("downsample.ratio must lie in (0, 1]");
  }
  if (n_max < 0) throw ConfigError("n_max must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
  if (eval_every < 1) throw ConfigError("eval_every must be positive");
  if (max_degree_bucket < 1) throw ConfigError("max_degree_bucket must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

std::string RunConfig::to_json_string() const {
  json j;
  j["dataset"] = {{"path", dataset_path},
                  {"format", dataset_format},
                  {"name", dataset_name},
                  {"task", task}};
  j["max_degree_bucket"] = max_degree_bucket;
  j["model"] = model;
  j["key_schedule"] = key_schedule;
  j["heads"] = heads;
  j["layers"] = layers;
  j["hidden_dim"] = hidden_dim;
  j["query_layers"] = query_layers;
  j["edge_hidden_dim"] = edge_hidden_dim;
  j["tau"] = tau;
  j["leaky_slope"] = leaky_slope;
  j["restart_prob"] = restart_prob;
  j["embedding_variant"] = embedding_variant;
  j["sort_topo"] = sort_topo;
  j["downsample"] = {{"method", downsample_method}, {"ratio", downsample_ratio}};
  j["n_max"] = n_max;
  j["drop_oversized"] = drop_oversized;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["lr"] = lr;
  j["lr_decay_every"] = lr_decay_every;
  j["lr_decay"] = lr_decay;
  j["dropout"] = dropout;
  j["lambda"] = lambda;
  j["seed"] = seed;
  j["val_fraction"] = val_fraction;
  j["eval_every"] = eval_every;
  j["output_dir"] = output_dir;
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const std::set<std::string> known{
      "dataset",       "max_degree_bucket", "model",         "key_schedule",
      "heads",         "layers",            "hidden_dim",    "query_layers",
      "edge_hidden_dim", "tau",             "leaky_slope",   "restart_prob",
      "embedding_variant", "sort_topo",     "downsample",    "n_max",
      "drop_oversized", "batch_size",       "max_epochs",    "lr",
      "lr_decay_every", "lr_decay",         "dropout",       "lambda",
      "seed",          "val_fraction",      "eval_every",    "output_dir"};
  reject_unknown(j, known, "");

  RunConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (!d.is_object()) throw ConfigError("dataset must be an object");
    reject_unknown(d, {"path", "format", "name", "task"}, "dataset.");
    read_field(d, "path", cfg.dataset_path);
    read_field(d, "format", cfg.dataset_format);
    read_field(d, "name", cfg.dataset_name);
    read_field(d, "task", cfg.task);
  }
  read_field(j, "max_degree_bucket", cfg.max_degree_bucket);
  read_field(j, "model", cfg.model);
  read_field(j, "key_schedule", cfg.key_schedule);
  read_field(j, "heads", cfg.heads);
  read_field(j, "layers", cfg.layers);
  read_field(j, "hidden_dim", cfg.hidden_dim);
  read_field(j, "query_layers", cfg.query_layers);
  read_field(j, "edge_hidden_dim", cfg.edge_hidden_dim);
  read_field(j, "tau", cfg.tau);
  read_field(j, "leaky_slope", cfg.leaky_slope);
  read_field(j, "restart_prob", cfg.restart_prob);
  read_field(j, "embedding_variant", cfg.embedding_variant);
  read_field(j, "sort_topo", cfg.sort_topo);
  if (j.contains("downsample")) {
    const json& d = j.at("downsample");
    if (!d.is_object()) throw ConfigError("downsample must be an object");
    reject_unknown(d, {"method", "ratio"}, "downsample.");
    read_field(d, "method", cfg.downsample_method);
    read_field(d, "ratio", cfg.downsample_ratio);
  }
  read_field(j, "n_max", cfg.n_max);
  read_field(j, "drop_oversized", cfg.drop_oversized);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "max_epochs", cfg.max_epochs);
  read_field(j, "lr", cfg.lr);
  read_field(j, "lr_decay_every", cfg.lr_decay_every);
  read_field(j, "lr_decay", cfg.lr_decay);
  read_field(j, "dropout", cfg.dropout);
  read_field(j, "lambda", cfg.lambda);
  read_field(j, "seed", cfg.seed);
  read_field(j, "val_fraction", cfg.val_fraction);
  read_field(j, "eval_every", cfg.eval_every);
  read_field(j, "output_dir", cfg.output_dir);
  cfg.validate();
  if (cfg.layers == 0) cfg.layers = static_cast<std::int64_t>(cfg.key_schedule.size());
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

}  // namespace graphmem
