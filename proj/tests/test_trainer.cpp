#include <doctest.h>

#include <cmath>

#include "graphmem/error.hpp"
#include "graphmem/runner.hpp"
#include "graphmem/synthetic.hpp"
#include "graphmem/trainer.hpp"
#include "test_util.hpp"

using namespace graphmem;
using namespace graphmem::testutil;

namespace {

ModelConfig small_gmn_config(const DatasetTable& ds) {
  ModelConfig cfg;
  cfg.kind = ModelKind::gmn;
  cfg.task = ds.task;
  cfg.key_schedule = {4, 1};
  cfg.heads = 2;
  cfg.hidden_dim = 8;
  cfg.d_in = ds.d_in;
  cfg.d_e = ds.d_e;
  cfg.class_count = ds.class_count;
  cfg.n_max = ds.max_nodes();
  cfg.validate();
  return cfg;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.max_epochs = 3;
  cfg.lr = 1e-2;
  cfg.seed = 11;
  return cfg;
}

std::vector<double> key_bytes(const ModelParams& params) {
  std::vector<double> out;
  for (const NamedTensor& t : params.tensors) {
    if (t.is_key) out.insert(out.end(), t.value.data().begin(), t.value.data().end());
  }
  return out;
}

}  // namespace

TEST_CASE("two-timescale schedule: keys move exactly once per epoch") {
  const DatasetTable ds = synthetic_community_dataset(20, 5);
  const ModelConfig mcfg = small_gmn_config(ds);
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(1);
  ModelParams params = init_model(mcfg, rng);
  const TrainConfig tcfg = small_train_config();
  AdamOptimizer opt(params, AdamConfig{tcfg.lr, 0.9, 0.999, 1e-8});

  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < ds.size(); ++i) idx.push_back(i);

  const std::vector<double> before = key_bytes(params);
  std::int64_t batches_seen = 0;
  BatchObserver observer = [&](const ModelParams& p, std::int64_t) {
    ++batches_seen;
    CHECK(key_bytes(p) == before);  // keys bitwise unchanged by batch steps
  };
  train_epoch(params, ds, idx, opt, tcfg, topo, 0, &observer);
  CHECK(batches_seen == 4);
  CHECK(key_bytes(params) != before);  // the epoch-end step moved them once
}

TEST_CASE("disabling the epoch-end step leaves keys bitwise unchanged") {
  const DatasetTable ds = synthetic_community_dataset(20, 6);
  const ModelConfig mcfg = small_gmn_config(ds);
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(2);
  ModelParams params = init_model(mcfg, rng);
  TrainConfig tcfg = small_train_config();
  tcfg.kl_epoch_step = false;
  AdamOptimizer opt(params, AdamConfig{tcfg.lr, 0.9, 0.999, 1e-8});

  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < ds.size(); ++i) idx.push_back(i);
  const std::vector<double> before = key_bytes(params);
  const std::vector<double> w_before = params.get("gmn.w0").data();
  const EpochReport report = train_epoch(params, ds, idx, opt, tcfg, topo, 0);
  CHECK(key_bytes(params) == before);
  CHECK(params.get("gmn.w0").data() != w_before);  // non-key params did move
  CHECK(report.kl == 0.0);
  CHECK(report.batch_sup.size() == 4);
}

TEST_CASE("fixed-seed training is bitwise reproducible") {
  auto run = [] {
    const DatasetTable ds = synthetic_community_dataset(20, 9);
    ModelConfig mcfg;
    mcfg.kind = ModelKind::gmn;
    mcfg.task = ds.task;
    mcfg.key_schedule = {4, 1};
    mcfg.heads = 2;
    mcfg.hidden_dim = 8;
    mcfg.dropout = 0.3;  // exercises the seeded dropout stream too
    mcfg.d_in = ds.d_in;
    mcfg.class_count = ds.class_count;
    mcfg.n_max = ds.max_nodes();
    const TopoCache topo = build_topo_cache(ds, mcfg);
    Rng rng(3);
    ModelParams params = init_model(mcfg, rng);
    TrainConfig tcfg;
    tcfg.batch_size = 5;
    tcfg.max_epochs = 3;
    tcfg.lr = 1e-2;
    tcfg.seed = 123;
    std::vector<std::int64_t> train_idx, val_idx;
    for (std::int64_t i = 0; i < 16; ++i) train_idx.push_back(i);
    for (std::int64_t i = 16; i < 20; ++i) val_idx.push_back(i);
    const FitResult fit_result = fit(params, ds, train_idx, val_idx, tcfg, topo);
    std::vector<double> trace;
    for (const EpochReport& e : fit_result.epochs) {
      trace.insert(trace.end(), e.batch_sup.begin(), e.batch_sup.end());
      trace.push_back(e.kl);
    }
    trace.insert(trace.end(), fit_result.val_metric.begin(), fit_result.val_metric.end());
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite loss reports the failing batch") {
  DatasetTable ds = synthetic_community_dataset(10, 7);
  ds.task = Task::regression;  // RMSE path overflows once predictions explode
  ds.class_count = 0;
  ModelConfig mcfg = small_gmn_config(ds);
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(4);
  ModelParams params = init_model(mcfg, rng);
  for (auto& v : params.get("head.weight").data()) v = 1e200;
  TrainConfig tcfg = small_train_config();
  AdamOptimizer opt(params, AdamConfig{tcfg.lr, 0.9, 0.999, 1e-8});
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < ds.size(); ++i) idx.push_back(i);
  CHECK_THROWS_WITH_AS(train_epoch(params, ds, idx, opt, tcfg, topo, 0),
                       doctest::Contains("batch"), NumericError);
}

TEST_CASE("padded entries never influence the loss") {
  const DatasetTable ds = synthetic_community_dataset(6, 8);
  ModelConfig mcfg = small_gmn_config(ds);
  mcfg.n_max = 24;  // force real padding
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(5);
  const ModelParams params = init_model(mcfg, rng);

  std::vector<std::int64_t> idx{0, 1, 2, 3};
  GraphBatch batch = batch_graphs(ds, idx, mcfg.n_max, BatchMode::gmn, topo.ptr());

  auto loss_of = [&](const GraphBatch& b) {
    Tape tape;
    const ModelVars vars = push_model(tape, params);
    return batch_loss(tape, vars, mcfg, b, /*lambda=*/0.5).total.value().at(0);
  };
  const double base = loss_of(batch);

  // touch every padded slot in node features, topo rows and adjacency
  Rng noise(99);
  for (std::int64_t b = 0; b < batch.size; ++b) {
    for (std::int64_t i = batch.true_n[static_cast<std::size_t>(b)]; i < mcfg.n_max; ++i) {
      for (std::int64_t c = 0; c < ds.d_in; ++c) {
        batch.node_feats.at(b, i, c) = noise.uniform(-5.0, 5.0);
      }
      for (std::int64_t c = 0; c < mcfg.n_max; ++c) {
        batch.topo_embed.at(b, i, c) = noise.uniform(-5.0, 5.0);
        batch.adjacency.at(b, i, c) = 1.0;
      }
    }
  }
  CHECK(loss_of(batch) == base);  // bitwise equal
}

TEST_CASE("evaluation is deterministic and ignores dropout") {
  const DatasetTable ds = synthetic_community_dataset(12, 10);
  ModelConfig mcfg = small_gmn_config(ds);
  mcfg.dropout = 0.5;
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(6);
  const ModelParams params = init_model(mcfg, rng);
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < ds.size(); ++i) idx.push_back(i);
  const Metrics a = evaluate_model(params, ds, idx, topo);
  const Metrics b = evaluate_model(params, ds, idx, topo);
  CHECK(*a.accuracy == *b.accuracy);
  CHECK(a.auc_roc.has_value());
  CHECK(*a.auc_roc == *b.auc_roc);
}

TEST_CASE("cross_validate: fold count and seed determinism") {
  const DatasetTable ds = synthetic_community_dataset(12, 20);
  const ModelConfig mcfg = small_gmn_config(ds);
  const TopoCache topo = build_topo_cache(ds, mcfg);
  TrainConfig tcfg = small_train_config();
  tcfg.max_epochs = 2;

  const CvResult a = cross_validate(ds, mcfg, tcfg, 3, topo);
  CHECK(a.fold_metrics.size() == 3);
  CHECK(a.metric_name == "accuracy");
  const CvResult b = cross_validate(ds, mcfg, tcfg, 3, topo);
  CHECK(a.fold_metrics == b.fold_metrics);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
}

TEST_CASE("adam: skip-keys step moves only non-key parameters") {
  const DatasetTable ds = synthetic_community_dataset(4, 30);
  const ModelConfig mcfg = small_gmn_config(ds);
  Rng rng(8);
  ModelParams params = init_model(mcfg, rng);
  AdamOptimizer opt(params, AdamConfig{});
  std::vector<Tensor> grads;
  for (const NamedTensor& t : params.tensors) grads.push_back(Tensor::full(t.value.shape(), 0.5));
  const std::vector<double> keys_before = key_bytes(params);
  opt.step(params, grads, /*include_keys=*/false, 1e-3);
  CHECK(key_bytes(params) == keys_before);
  CHECK(opt.main_steps() == 1);
  CHECK(opt.key_steps() == 0);
  opt.step(params, grads, /*include_keys=*/true, 1e-3);
  CHECK(key_bytes(params) != keys_before);
  CHECK(opt.key_steps() == 1);
}

TEST_CASE("learning rate halves every decay interval") {
  TrainConfig cfg;
  cfg.lr = 0.4;
  cfg.lr_decay_every = 500;
  cfg.lr_decay = 0.5;
  CHECK(cfg.lr_at_epoch(0) == doctest::Approx(0.4));
  CHECK(cfg.lr_at_epoch(499) == doctest::Approx(0.4));
  CHECK(cfg.lr_at_epoch(500) == doctest::Approx(0.2));
  CHECK(cfg.lr_at_epoch(1000) == doctest::Approx(0.1));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const DatasetTable ds = synthetic_community_dataset(4, 40);
  TempDir dir("ckpt");

  ModelConfig gmn = small_gmn_config(ds);
  Rng rng(9);
  const ModelParams params = init_model(gmn, rng);
  const std::string path = dir.file("model.gmck");
  save_checkpoint(params, path);
  const ModelParams loaded = load_checkpoint(path);
  REQUIRE(loaded.tensors.size() == params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].name == params.tensors[i].name);
    CHECK(loaded.tensors[i].is_key == params.tensors[i].is_key);
    CHECK(loaded.tensors[i].value.data() == params.tensors[i].value.data());
  }
  CHECK(loaded.config.key_schedule == gmn.key_schedule);
  CHECK(loaded.config.n_max == gmn.n_max);

  // memgnn variant with edge features
  ModelConfig mem = gmn;
  mem.kind = ModelKind::memgnn;
  mem.d_e = 3;
  mem.query_layers = 2;
  Rng rng2(10);
  const ModelParams mparams = init_model(mem, rng2);
  const std::string mpath = dir.file("mem.gmck");
  save_checkpoint(mparams, mpath);
  const ModelParams mloaded = load_checkpoint(mpath);
  CHECK(mloaded.tensors.size() == mparams.tensors.size());
  CHECK(mloaded.get("egat.l1.attn").data() == mparams.get("egat.l1.attn").data());

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.gmck")), FormatError);
}

TEST_CASE("max_epochs zero trains nothing and keeps initial parameters") {
  const DatasetTable ds = synthetic_community_dataset(8, 50);
  const ModelConfig mcfg = small_gmn_config(ds);
  const TopoCache topo = build_topo_cache(ds, mcfg);
  Rng rng(11);
  ModelParams params = init_model(mcfg, rng);
  const std::vector<double> before = params.get("gmn.w0").data();
  TrainConfig tcfg = small_train_config();
  tcfg.max_epochs = 0;
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < ds.size(); ++i) idx.push_back(i);
  const FitResult result = fit(params, ds, idx, {}, tcfg, topo);
  CHECK(result.epochs.empty());
  CHECK(params.get("gmn.w0").data() == before);
  CHECK(result.best_params.get("gmn.w0").data() == before);
}
