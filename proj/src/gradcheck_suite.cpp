#include "graphmem/gradcheck_suite.hpp"

#include <cmath>

#include "graphmem/synthetic.hpp"
#include "graphmem/trainer.hpp"

namespace graphmem {

namespace {

constexpr double kEps = 1e-5;

Tensor rand_tensor(Rng& rng, std::vector<std::int64_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor rand_off_kink(Rng& rng, std::vector<std::int64_t> shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    const double mag = rng.uniform(0.1, 1.5);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Tiny random dataset with n <= 6 nodes per graph for the end-to-end checks.
DatasetTable tiny_dataset(Rng& rng, bool edge_features, bool regression) {
  DatasetTable ds;
  ds.name = "gradcheck_fixture";
  ds.d_in = 3;
  ds.d_e = edge_features ? 2 : 0;
  ds.task = regression ? Task::regression : Task::binary;
  ds.class_count = regression ? 0 : 2;
  for (int gi = 0; gi < 2; ++gi) {
    Graph g;
    g.n = 4 + gi;
    g.adjacency = Tensor({g.n, g.n});
    for (std::int64_t i = 0; i < g.n; ++i) {
      for (std::int64_t j = i + 1; j < g.n; ++j) {
        if (rng.uniform() < 0.6) {
          g.adjacency.at(i, j) = 1.0;
          g.adjacency.at(j, i) = 1.0;
          g.edges.push_back({i, j});
        }
      }
    }
    if (g.edges.empty()) {
      g.adjacency.at(0, 1) = 1.0;
      g.adjacency.at(1, 0) = 1.0;
      g.edges.push_back({0, 1});
    }
    g.node_features = rand_tensor(rng, {g.n, ds.d_in}, -1.0, 1.0);
    if (edge_features) {
      g.edge_features =
          rand_tensor(rng, {static_cast<std::int64_t>(g.edges.size()), ds.d_e}, -1.0, 1.0);
    }
    g.target = regression ? rng.uniform(-1.0, 1.0) : static_cast<double>(gi % 2);
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

ModelConfig tiny_config(const DatasetTable& ds, ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.task = ds.task;
  cfg.key_schedule = {3, 1};
  cfg.heads = 2;
  cfg.hidden_dim = 4;
  cfg.d_in = ds.d_in;
  cfg.d_e = ds.d_e;
  cfg.class_count = ds.class_count;
  cfg.n_max = ds.max_nodes();
  cfg.query_layers = 1;
  cfg.edge_hidden_dim = 2;
  cfg.validate();
  return cfg;
}

// Checks the full training objective at a fixed lambda, with the KL target
// distributions pinned to their values at the evaluation point (they are
// constants of the optimization step, not differentiated through).
double check_model_loss(Rng& rng, ModelKind kind, double lambda, bool regression) {
  DatasetTable ds = tiny_dataset(rng, kind == ModelKind::memgnn, regression);
  const ModelConfig cfg = tiny_config(ds, kind);
  const TopoCache topo = build_topo_cache(ds, cfg);
  const GraphBatch batch = batch_graphs(
      ds, {0, 1}, cfg.n_max, kind == ModelKind::gmn ? BatchMode::gmn : BatchMode::memgnn,
      topo.ptr());

  Rng init_rng = rng.fork(rng_tag("init"));
  ModelParams params = init_model(cfg, init_rng);

  // Pin the KL targets at the evaluation point.
  std::vector<std::vector<Tensor>> pinned;
  {
    Tape tape;
    const ModelVars vars = push_model(tape, params);
    pinned = batch_loss(tape, vars, cfg, batch, /*lambda=*/0.0).targets;
  }

  std::vector<Tensor> values;
  values.reserve(params.tensors.size());
  for (const NamedTensor& t : params.tensors) values.push_back(t.value);

  auto f = [&](Tape& tape, const std::vector<Var>& vs) {
    ModelVars vars;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      vars.vars.emplace(params.tensors[i].name, vs[i]);
    }
    return batch_loss(tape, vars, cfg, batch, lambda, false, nullptr,
                      lambda < 1.0 ? &pinned : nullptr)
        .total;
  };
  return grad_check_params(f, values, kEps);
}

}  // namespace

std::vector<GradCheckLine> run_gradcheck_suite(std::uint64_t seed, double tol,
                                               bool inject_fault) {
  Rng rng = Rng(seed).fork(rng_tag("gradcheck_suite"));
  std::vector<GradCheckLine> lines;
  auto record = [&](const std::string& name, double err) {
    lines.push_back({name, err, err < tol});
  };

  // --- individual ops --------------------------------------------------------
  {
    Tensor a = rand_tensor(rng, {3, 4}, -1.5, 1.5);
    Tensor b = rand_tensor(rng, {4, 2}, -1.5, 1.5);
    record("matmul", grad_check_params(
                         [](Tape&, const std::vector<Var>& vs) {
                           return sum_squares(matmul(vs[0], vs[1]));
                         },
                         {a, b}, kEps));
  }
  record("transpose", grad_check(
                          [](Tape&, const Var& v) { return sum_squares(transpose(v)); },
                          rand_tensor(rng, {2, 5}, -1.0, 1.0), kEps));
  record("row_softmax", grad_check(
                            [](Tape&, const Var& v) { return sum_squares(row_softmax(v)); },
                            rand_tensor(rng, {3, 4}, -2.0, 2.0), kEps));
  record("row_normalize", grad_check(
                              [](Tape&, const Var& v) { return sum_squares(row_normalize(v)); },
                              rand_tensor(rng, {3, 4}, 0.2, 2.0), kEps));
  record("leaky_relu", grad_check(
                           [](Tape&, const Var& v) {
                             return sum_squares(leaky_relu(v, 0.01));
                           },
                           rand_off_kink(rng, {3, 4}), kEps));
  {
    Tensor q = rand_tensor(rng, {4, 3}, -1.0, 1.0);
    Tensor k = rand_tensor(rng, {2, 3}, -1.0, 1.0);
    record("pairwise_sq_dist", grad_check_params(
                                   [](Tape&, const std::vector<Var>& vs) {
                                     return sum_squares(pairwise_sq_dist(vs[0], vs[1]));
                                   },
                                   {q, k}, kEps));
    record("student_t_assignment",
           grad_check_params(
               [](Tape&, const std::vector<Var>& vs) {
                 return sum_squares(student_t_assignment(vs[0], vs[1], 1.0));
               },
               {q, k}, kEps));
  }
  record("student_t_kernel", grad_check(
                                 [](Tape&, const Var& v) {
                                   return sum_squares(student_t_kernel(v, 1.0));
                                 },
                                 rand_tensor(rng, {3, 2}, 0.1, 3.0), kEps));
  {
    Tensor c1 = rand_tensor(rng, {3, 2}, -1.0, 1.0);
    Tensor c2 = rand_tensor(rng, {3, 3}, -1.0, 1.0);
    record("concat_cols", grad_check_params(
                              [](Tape&, const std::vector<Var>& vs) {
                                return sum_squares(concat_cols(vs[0], vs[1]));
                              },
                              {c1, c2}, kEps));
    record("concat_rows", grad_check_params(
                              [](Tape&, const std::vector<Var>& vs) {
                                return sum_squares(concat_rows({vs[0], transpose(vs[1])}));
                              },
                              {c1, rand_tensor(rng, {2, 4}, -1.0, 1.0)}, kEps));
  }
  record("take_rows", grad_check(
                          [](Tape&, const Var& v) {
                            return sum_squares(take_rows(v, {1, 0, 1}));
                          },
                          rand_tensor(rng, {3, 4}, -1.0, 1.0), kEps));
  record("tile_rows", grad_check(
                          [](Tape&, const Var& v) { return sum_squares(tile_rows(v, 5)); },
                          rand_tensor(rng, {1, 3}, -1.0, 1.0), kEps));
  {
    Tensor x = rand_tensor(rng, {4, 3}, -1.0, 1.0);
    Tensor s = rand_tensor(rng, {4, 1}, -1.0, 1.0);
    record("scale_rows", grad_check_params(
                             [](Tape&, const std::vector<Var>& vs) {
                               return sum_squares(scale_rows(vs[0], vs[1]));
                             },
                             {x, s}, kEps));
  }
  record("segment_sum", grad_check(
                            [](Tape&, const Var& v) {
                              return sum_squares(segment_sum(v, {0, 1, 0, 2}, 3));
                            },
                            rand_tensor(rng, {4, 3}, -1.0, 1.0), kEps));
  record("segment_softmax", grad_check(
                                [](Tape&, const Var& v) {
                                  return sum_squares(segment_softmax(v, {0, 0, 1, 1, 1}));
                                },
                                rand_tensor(rng, {5, 1}, -2.0, 2.0), kEps));
  record("slice_head", grad_check(
                           [](Tape&, const Var& v) {
                             return sum_squares(slice_head(v, 1));
                           },
                           rand_tensor(rng, {2, 3, 4}, -1.0, 1.0), kEps));
  {
    Tensor x = rand_tensor(rng, {3, 2}, -1.0, 1.0);
    Tensor w = rand_tensor(rng, {2}, -1.0, 1.0);
    Tensor b = rand_tensor(rng, {1}, -0.5, 0.5);
    record("select_entry+scale_by",
           grad_check_params(
               [](Tape&, const std::vector<Var>& vs) {
                 return sum_squares(scale_by(vs[0], select_entry(vs[1], 1)));
               },
               {x, w}, kEps));
    record("add_scalar", grad_check_params(
                             [](Tape&, const std::vector<Var>& vs) {
                               return sum_squares(add_scalar(vs[0], vs[1]));
                             },
                             {x, b}, kEps));
    record("aggregate_heads",
           grad_check_params(
               [](Tape&, const std::vector<Var>& vs) {
                 return sum_squares(
                     aggregate_heads({vs[0], transpose(vs[3])}, vs[1], vs[2]));
               },
               {x, w, b, rand_tensor(rng, {2, 3}, -1.0, 1.0)}, kEps));
  }
  record("softmax_cross_entropy",
         grad_check(
             [](Tape&, const Var& v) { return softmax_cross_entropy(v, {1, 0, 2}); },
             rand_tensor(rng, {3, 3}, -2.0, 2.0), kEps));
  {
    Tensor c = rand_tensor(rng, {3, 3}, 0.05, 1.0);
    Tape tmp;
    const Tensor p = target_distribution(row_normalize(tmp.constant(c)).value());
    record("kl_divergence", grad_check(
                                [&p](Tape&, const Var& v) {
                                  return kl_divergence(p, row_normalize(v));
                                },
                                c, kEps));
  }
  record("sqrt_scalar", grad_check(
                            [](Tape&, const Var& v) { return sqrt_scalar(v); },
                            rand_tensor(rng, {1}, 0.5, 2.0), kEps));
  record("sum_all", grad_check([](Tape&, const Var& v) { return sum_all(v); },
                               rand_tensor(rng, {2, 3}, -1.0, 1.0), kEps));
  record("sum_squares", grad_check([](Tape&, const Var& v) { return sum_squares(v); },
                                   rand_tensor(rng, {2, 3}, -1.0, 1.0), kEps));

  // --- composite layers -------------------------------------------------------
  {
    Rng layer_rng = rng.fork(rng_tag("mem_layer"));
    const MemoryLayerParams layer = init_memory_layer(2, 3, 4, 4, 1.0, layer_rng);
    Tensor q = rand_tensor(rng, {5, 4}, -1.0, 1.0);
    record("memory_layer_forward",
           grad_check_params(
               [&](Tape&, const std::vector<Var>& vs) {
                 MemoryLayerVars lv{vs[1], vs[2], vs[3], vs[4], 1.0};
                 const MemoryLayerOutput out = memory_layer_forward(vs[0], lv, nullptr, 0.01);
                 return add(sum_squares(out.queries_next), sum_squares(out.assignment));
               },
               {q, layer.keys, layer.head_mix_weight, layer.head_mix_bias, layer.proj_weight},
               kEps));
  }

  // --- end-to-end model losses -----------------------------------------------
  record("gmn_loss_supervised", check_model_loss(rng, ModelKind::gmn, 1.0, false));
  record("gmn_loss_clustering", check_model_loss(rng, ModelKind::gmn, 0.0, false));
  record("gmn_loss_mixed", check_model_loss(rng, ModelKind::gmn, 0.5, false));
  record("gmn_loss_rmse", check_model_loss(rng, ModelKind::gmn, 1.0, true));
  record("memgnn_loss_supervised", check_model_loss(rng, ModelKind::memgnn, 1.0, false));
  record("memgnn_loss_clustering", check_model_loss(rng, ModelKind::memgnn, 0.0, false));
  record("memgnn_loss_mixed", check_model_loss(rng, ModelKind::memgnn, 0.5, false));
  record("memgnn_loss_rmse", check_model_loss(rng, ModelKind::memgnn, 1.0, true));

  if (inject_fault) {
    // Negative control: a product whose backward drops the factor 2.
    record("corrupted_backward",
           grad_check(
               [](Tape& tape, const Var& v) {
                 Tensor out = v.value();
                 for (auto& val : out.data()) val *= val;
                 Var broken =
                     tape.make(std::move(out), {{v, [](const Tensor& g) { return g; }}});
                 return sum_all(broken);
               },
               rand_tensor(rng, {3}, 0.5, 2.0), kEps));
  }
  return lines;
}

}  // namespace graphmem
