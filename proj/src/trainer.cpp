#include "graphmem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "graphmem/diffusion.hpp"
#include "graphmem/error.hpp"

namespace graphmem {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (eval_every < 1) throw ConfigError("eval_every must be positive");
}

double TrainConfig::lr_at_epoch(std::int64_t epoch) const {
  return lr * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

TopoCache build_topo_cache(const DatasetTable& ds, const ModelConfig& cfg,
                           const std::string& cache_dir) {
  TopoCache cache;
  if (cfg.kind != ModelKind::gmn) return cache;

  std::optional<std::vector<Tensor>> matrices;
  if (!cache_dir.empty()) {
    const std::string path = diffusion_cache_file(cache_dir, ds.name, cfg.diffusion);
    matrices = read_diffusion_cache(path, ds.name, cfg.diffusion, ds.size());
  }
  cache.rows.reserve(ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const Tensor mat =
        matrices ? (*matrices)[i] : diffusion_matrix(ds.graphs[i], cfg.diffusion);
    cache.rows.push_back(
        topological_embedding_from_matrix(mat, cfg.diffusion, cfg.n_max, cfg.sort_topo));
  }
  return cache;
}

BatchLossResult batch_loss(Tape& tape, const ModelVars& vars, const ModelConfig& cfg,
                           const GraphBatch& batch, double lambda, bool training,
                           Rng* dropout_rng, const std::vector<std::vector<Tensor>>* pinned) {
  BatchLossResult out;
  const std::int64_t b = batch.size;
  std::vector<Var> logits;
  logits.reserve(static_cast<std::size_t>(b));
  for (std::int64_t g = 0; g < b; ++g) {
    out.forwards.push_back(model_forward(tape, vars, cfg, batch, g, training, dropout_rng));
    logits.push_back(out.forwards.back().logits);
  }

  Var sup = supervised_loss(logits, batch.targets, cfg.task);
  out.sup = sup.value().at(0);

  std::vector<Var> kl_vars;
  const bool want_kl = lambda < 1.0;
  if (want_kl) {
    const std::size_t num_layers = cfg.key_schedule.size();
    out.targets.resize(static_cast<std::size_t>(b));
    for (std::size_t l = 0; l < num_layers; ++l) {
      Var layer_sum;
      for (std::int64_t g = 0; g < b; ++g) {
        Var c = out.forwards[static_cast<std::size_t>(g)].assignments[l];
        if (l == 0) {
          // Only unmasked rows are distributions; padded rows are zero.
          c = take_rows(c, batch.real_node_list(g));
        }
        Tensor p = pinned ? (*pinned)[static_cast<std::size_t>(g)][l]
                          : target_distribution(c.value());
        out.targets[static_cast<std::size_t>(g)].push_back(p);
        Var kl = kl_divergence(p, c);
        layer_sum = layer_sum.valid() ? add(layer_sum, kl) : kl;
      }
      Var layer_mean = scale(layer_sum, 1.0 / static_cast<double>(b));
      out.kl_per_layer.push_back(layer_mean.value().at(0));
      kl_vars.push_back(layer_mean);
    }
  }

  out.total = total_loss(sup, kl_vars, lambda);
  return out;
}

namespace {

std::vector<Tensor> collect_grads(Tape& tape, const ModelVars& vars, const ModelParams& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.tensors.size());
  for (const NamedTensor& t : params.tensors) grads.push_back(tape.grad(vars.get(t.name)));
  return grads;
}

std::vector<std::vector<std::int64_t>> make_batches(std::vector<std::int64_t> order,
                                                    std::int64_t batch_size) {
  std::vector<std::vector<std::int64_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

EpochReport train_epoch(ModelParams& params, const DatasetTable& ds,
                        const std::vector<std::int64_t>& train_idx, AdamOptimizer& opt,
                        const TrainConfig& cfg, const TopoCache& topo, std::int64_t epoch,
                        const BatchObserver* after_batch) {
  cfg.validate();
  if (train_idx.empty()) throw ContractError("train_epoch: empty training set");
  const ModelConfig& mcfg = params.config;
  const BatchMode mode = mcfg.kind == ModelKind::gmn ? BatchMode::gmn : BatchMode::memgnn;
  const double lr = cfg.lr_at_epoch(epoch);

  std::vector<std::int64_t> order = train_idx;
  Rng shuffle_rng = Rng(cfg.seed).fork(rng_tag("epoch_shuffle"), static_cast<std::uint64_t>(epoch));
  shuffle_rng.shuffle(order);
  Rng dropout_rng = Rng(cfg.seed).fork(rng_tag("dropout"), static_cast<std::uint64_t>(epoch));
  const auto batches = make_batches(std::move(order), cfg.batch_size);

  EpochReport report;

  // (a) batch-wise supervised steps; keys stay untouched.
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const GraphBatch batch = batch_graphs(ds, batches[bi], mcfg.n_max, mode, topo.ptr());
    Tape tape;
    const ModelVars vars = push_model(tape, params);
    BatchLossResult loss =
        batch_loss(tape, vars, mcfg, batch, cfg.lambda, /*training=*/true, &dropout_rng);
    if (!std::isfinite(loss.total.value().at(0))) {
      throw NumericError("train_epoch: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(bi));
    }
    tape.backward(loss.total);
    const std::vector<Tensor> grads = collect_grads(tape, vars, params);
    opt.step(params, grads, /*include_keys=*/false, lr);
    report.batch_sup.push_back(loss.sup);
    if (after_batch) (*after_batch)(params, static_cast<std::int64_t>(bi));
  }
  double sup_sum = 0.0;
  for (double v : report.batch_sup) sup_sum += v;
  report.sup_mean = sup_sum / static_cast<double>(report.batch_sup.size());

  // (b) one epoch-end step on the accumulated KL gradient; the only step
  // that moves the keys.
  if (cfg.kl_epoch_step) {
    std::vector<Tensor> acc;
    acc.reserve(params.tensors.size());
    for (const NamedTensor& t : params.tensors) acc.push_back(Tensor::zeros(t.value.shape()));
    const double total = static_cast<double>(train_idx.size());
    double kl_value = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const GraphBatch batch = batch_graphs(ds, batches[bi], mcfg.n_max, mode, topo.ptr());
      Tape tape;
      const ModelVars vars = push_model(tape, params);
      BatchLossResult loss =
          batch_loss(tape, vars, mcfg, batch, /*lambda=*/0.0, /*training=*/true, &dropout_rng);
      if (!std::isfinite(loss.total.value().at(0))) {
        throw NumericError("train_epoch: non-finite clustering loss at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(bi));
      }
      tape.backward(loss.total);
      const double weight = static_cast<double>(batch.size) / total;
      kl_value += loss.total.value().at(0) * weight;
      const std::vector<Tensor> grads = collect_grads(tape, vars, params);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        for (std::int64_t j = 0; j < acc[i].numel(); ++j) {
          acc[i].at(j) += grads[i].at(j) * weight;
        }
      }
    }
    opt.step(params, acc, /*include_keys=*/true, lr);
    report.kl = kl_value;
  }
  return report;
}

Metrics evaluate_model(const ModelParams& params, const DatasetTable& ds,
                       const std::vector<std::int64_t>& indices, const TopoCache& topo) {
  if (indices.empty()) throw ContractError("evaluate_model: empty evaluation set");
  const ModelConfig& mcfg = params.config;
  const BatchMode mode = mcfg.kind == ModelKind::gmn ? BatchMode::gmn : BatchMode::memgnn;
  std::vector<Tensor> outputs;
  std::vector<double> targets;
  outputs.reserve(indices.size());
  for (std::int64_t idx : indices) {
    const GraphBatch single = batch_graphs(ds, {idx}, mcfg.n_max, mode, topo.ptr());
    Tape tape;
    const ModelVars vars = push_model(tape, params);
    const GraphForward fwd = model_forward(tape, vars, mcfg, single, 0, /*training=*/false);
    outputs.push_back(fwd.logits.value());
    targets.push_back(ds.graphs[static_cast<std::size_t>(idx)].target);
  }
  return metrics_from_outputs(outputs, targets, mcfg.task);
}

FitResult fit(ModelParams& params, const DatasetTable& ds,
              const std::vector<std::int64_t>& train_idx,
              const std::vector<std::int64_t>& val_idx, const TrainConfig& cfg,
              const TopoCache& topo) {
  cfg.validate();
  FitResult result;
  result.best_params = params;
  AdamOptimizer opt(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  const bool lower_is_better = params.config.task == Task::regression;

  for (std::int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    result.epochs.push_back(train_epoch(params, ds, train_idx, opt, cfg, topo, epoch));
    double val = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty() && (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.max_epochs)) {
      val = evaluate_model(params, ds, val_idx, topo).primary(params.config.task);
      const bool better = result.best_epoch < 0 ||
                          (lower_is_better ? val < result.best_val : val > result.best_val);
      if (better) {
        result.best_val = val;
        result.best_epoch = epoch;
        result.best_params = params;
      }
    }
    result.val_metric.push_back(val);
  }
  if (result.best_epoch < 0) result.best_params = params;
  return result;
}

CvResult cross_validate(const DatasetTable& ds, const ModelConfig& model_cfg,
                        const TrainConfig& cfg, std::int64_t k, const TopoCache& topo) {
  cfg.validate();
  model_cfg.validate();
  const FoldSplit split = stratified_kfold(ds, k, cfg.seed);

  CvResult result;
  result.metric_name = model_cfg.task == Task::regression ? "rmse" : "accuracy";
  for (std::int64_t f = 0; f < k; ++f) {
    Rng fold_rng = Rng(cfg.seed).fork(rng_tag("fold_init"), static_cast<std::uint64_t>(f));
    ModelParams params = init_model(model_cfg, fold_rng);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = Rng(cfg.seed).fork(rng_tag("fold_seed"), static_cast<std::uint64_t>(f)).seed();
    const FitResult fit_result =
        fit(params, ds, split.complement_indices(f), split.fold_indices(f), fold_cfg, topo);
    const double metric =
        fit_result.best_epoch >= 0
            ? fit_result.best_val
            : evaluate_model(params, ds, split.fold_indices(f), topo).primary(model_cfg.task);
    result.fold_metrics.push_back(metric);
  }

  double mean = 0.0;
  for (double m : result.fold_metrics) mean += m;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double m : result.fold_metrics) var += (m - mean) * (m - mean);
  result.mean = mean;
  result.stddev = std::sqrt(var / static_cast<double>(k));
  return result;
}

}  // namespace graphmem
