#include "graphmem/runner.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "graphmem/dataset_io.hpp"
#include "graphmem/diffusion.hpp"
#include "graphmem/error.hpp"

namespace graphmem {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetTable load_dataset(const RunConfig& rc) {
  DatasetTable ds;
  if (rc.dataset_format == "tu") {
    TuLoadOptions opts;
    opts.max_degree_bucket = rc.max_degree_bucket;
    ds = load_tu_dataset(rc.dataset_path, rc.dataset_name, opts);
  } else {
    ds = load_molecule_dataset(rc.dataset_path);
  }
  if (rc.task != "auto") {
    const Task forced = task_from_name(rc.task);
    if (forced == Task::regression && ds.task != Task::regression) {
      ds.class_count = 0;  // remapped class ids become the regression targets
    }
    if (forced != Task::regression && ds.task == Task::regression) {
      throw ConfigError("cannot train a classifier on non-integral targets");
    }
    ds.task = forced;
  }
  return ds;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

PreparedRun prepare_run(const RunConfig& rc, const std::string& cache_dir) {
  rc.validate();
  PreparedRun prep;
  prep.run = rc;
  prep.ds = load_dataset(rc);

  if (rc.downsample_method != "none") {
    const DownsampleMethod method = rc.downsample_method == "random"
                                        ? DownsampleMethod::random
                                        : DownsampleMethod::rwr_rank;
    for (std::size_t i = 0; i < prep.ds.graphs.size(); ++i) {
      prep.ds.graphs[i] =
          downsample_edges(prep.ds.graphs[i], rc.downsample_ratio, method,
                           Rng(rc.seed).fork(rng_tag("downsample"), i).seed());
    }
  }

  std::int64_t n_max = rc.n_max > 0 ? rc.n_max : prep.ds.max_nodes();
  if (rc.n_max > 0 && prep.ds.max_nodes() > rc.n_max) {
    if (!rc.drop_oversized) {
      throw ConfigError("n_max " + std::to_string(rc.n_max) + " is below the dataset maximum " +
                        std::to_string(prep.ds.max_nodes()) +
                        "; set drop_oversized to discard larger graphs");
    }
    std::vector<Graph> kept;
    for (Graph& g : prep.ds.graphs) {
      if (g.n <= rc.n_max) kept.push_back(std::move(g));
    }
    if (kept.empty()) throw ConfigError("drop_oversized removed every graph");
    prep.ds.graphs = std::move(kept);
  }

  ModelConfig& m = prep.model_cfg;
  m.kind = model_kind_from_name(rc.model);
  m.task = prep.ds.task;
  m.key_schedule = rc.key_schedule;
  m.heads = rc.heads;
  m.hidden_dim = rc.hidden_dim;
  m.tau = rc.tau;
  m.leaky_slope = rc.leaky_slope;
  m.dropout = rc.dropout;
  m.d_in = prep.ds.d_in;
  m.d_e = prep.ds.d_e;
  m.class_count = prep.ds.class_count;
  m.n_max = n_max;
  m.diffusion.variant = diffusion_variant_from_name(rc.embedding_variant);
  m.diffusion.restart_prob = rc.restart_prob;
  m.sort_topo = rc.sort_topo;
  m.query_layers = rc.query_layers;
  m.edge_hidden_dim = rc.edge_hidden_dim;
  m.validate();

  TrainConfig& t = prep.train_cfg;
  t.batch_size = rc.batch_size;
  t.max_epochs = rc.max_epochs;
  t.lr = rc.lr;
  t.lr_decay_every = rc.lr_decay_every;
  t.lr_decay = rc.lr_decay;
  t.lambda = rc.lambda;
  t.seed = rc.seed;
  t.eval_every = rc.eval_every;
  t.validate();

  prep.topo = build_topo_cache(prep.ds, prep.model_cfg, cache_dir);
  return prep;
}

TrainOutput run_train(const PreparedRun& prep) {
  std::vector<std::int64_t> train_idx, val_idx;
  const std::int64_t n = prep.ds.size();
  if (prep.run.val_fraction > 0.0) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng = Rng(prep.run.seed).fork(rng_tag("val_split"));
    rng.shuffle(order);
    const std::int64_t n_val = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(prep.run.val_fraction * static_cast<double>(n))));
    val_idx.assign(order.begin(), order.begin() + n_val);
    train_idx.assign(order.begin() + n_val, order.end());
  } else {
    for (std::int64_t i = 0; i < n; ++i) train_idx.push_back(i);
    val_idx = train_idx;  // logged metric falls back to the training set
  }

  Rng init_rng = Rng(prep.run.seed).fork(rng_tag("model_init"));
  ModelParams params = init_model(prep.model_cfg, init_rng);

  TrainOutput out{params, {}, {}};
  out.fit = fit(params, prep.ds, train_idx, val_idx, prep.train_cfg, prep.topo);
  out.checkpoint = out.fit.best_epoch >= 0 ? out.fit.best_params : params;

  for (std::size_t e = 0; e < out.fit.epochs.size(); ++e) {
    json line;
    line["epoch"] = e;
    line["sup_loss"] = out.fit.epochs[e].sup_mean;
    line["kl_loss"] = out.fit.epochs[e].kl;
    const double vm = out.fit.val_metric[e];
    if (std::isnan(vm)) {
      line["val_metric"] = nullptr;
    } else {
      line["val_metric"] = vm;
    }
    out.log_lines.push_back(line.dump());
  }
  return out;
}

CvResult run_cv(const PreparedRun& prep, std::int64_t k) {
  return cross_validate(prep.ds, prep.model_cfg, prep.train_cfg, k, prep.topo);
}

std::string metrics_csv(const CvResult& cv) {
  std::string out = "fold," + cv.metric_name + "," + cv.metric_name + "_std\n";
  for (std::size_t f = 0; f < cv.fold_metrics.size(); ++f) {
    out += std::to_string(f) + "," + format_double(cv.fold_metrics[f]) + ",0\n";
  }
  out += "aggregate," + format_double(cv.mean) + "," + format_double(cv.stddev) + "\n";
  return out;
}

std::string eval_csv(const Metrics& metrics, Task task) {
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
  };
  std::string out = "metric,value\n";
  if (task == Task::regression) {
    out += "rmse," + cell(metrics.rmse) + "\n";
    out += "r2," + cell(metrics.r2) + "\n";
  } else {
    out += "accuracy," + cell(metrics.accuracy) + "\n";
    if (task == Task::binary) out += "auc_roc," + cell(metrics.auc_roc) + "\n";
  }
  return out;
}

std::vector<std::string> export_clusters(const ModelParams& params, const DatasetTable& ds,
                                         const TopoCache& topo, const std::string& out_dir) {
  const ModelConfig& cfg = params.config;
  if (ds.d_in != cfg.d_in || ds.max_nodes() > cfg.n_max) {
    throw DataError("export_clusters: dataset dimensions do not match the checkpoint");
  }
  const BatchMode mode = cfg.kind == ModelKind::gmn ? BatchMode::gmn : BatchMode::memgnn;
  const std::size_t num_layers = cfg.key_schedule.size();

  std::vector<std::string> bodies(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    bodies[l] = "graph_id,node_id,cluster";
    for (std::int64_t c = 0; c < cfg.key_schedule[l]; ++c) {
      bodies[l] += ",c" + std::to_string(c);
    }
    bodies[l] += "\n";
  }

  for (std::int64_t gi = 0; gi < ds.size(); ++gi) {
    const GraphBatch single = batch_graphs(ds, {gi}, cfg.n_max, mode, topo.ptr());
    Tape tape;
    const ModelVars vars = push_model(tape, params);
    const GraphForward fwd = model_forward(tape, vars, cfg, single, 0);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const Tensor& c = fwd.assignments[l].value();
      const std::int64_t rows =
          l == 0 ? single.true_n[0] : c.rows();  // masked rows are dropped
      for (std::int64_t i = 0; i < rows; ++i) {
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < c.cols(); ++j) {
          if (c.at(i, j) > c.at(i, best)) best = j;
        }
        bodies[l] += std::to_string(gi) + "," + std::to_string(i) + "," + std::to_string(best);
        for (std::int64_t j = 0; j < c.cols(); ++j) bodies[l] += "," + format_double(c.at(i, j));
        bodies[l] += "\n";
      }
    }
  }

  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string path = (fs::path(out_dir) / ("clusters_layer" + std::to_string(l) + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << bodies[l];
    paths.push_back(path);
  }
  return paths;
}

std::string run_preprocess(const RunConfig& rc, const std::string& cache_dir) {
  rc.validate();
  if (cache_dir.empty()) throw ConfigError("preprocess needs a cache directory");
  DatasetTable ds = load_dataset(rc);
  DiffusionConfig cfg;
  cfg.variant = diffusion_variant_from_name(rc.embedding_variant);
  cfg.restart_prob = rc.restart_prob;
  std::vector<Tensor> matrices;
  matrices.reserve(ds.graphs.size());
  for (const Graph& g : ds.graphs) matrices.push_back(diffusion_matrix(g, cfg));
  fs::create_directories(cache_dir);
  const std::string path = diffusion_cache_file(cache_dir, ds.name, cfg);
  write_diffusion_cache(path, ds.name, cfg, matrices);
  return path;
}

}  // namespace graphmem
