#include <doctest.h>

#include <set>

#include "graphmem/batch.hpp"
#include "graphmem/dataset_io.hpp"
#include "graphmem/error.hpp"
#include "graphmem/kfold.hpp"
#include "test_util.hpp"

using namespace graphmem;
using namespace graphmem::testutil;

namespace {

DatasetTable synthetic_classification(std::int64_t per_class, std::int64_t classes,
                                      std::uint64_t seed) {
  Rng rng(seed);
  DatasetTable ds;
  ds.task = classes > 2 ? Task::multiclass : Task::binary;
  ds.class_count = classes;
  ds.d_in = 4;
  ds.name = "synthetic";
  for (std::int64_t c = 0; c < classes; ++c) {
    for (std::int64_t i = 0; i < per_class; ++i) {
      Graph g = random_graph(rng, 4 + static_cast<std::int64_t>(rng.uniform_int(4)), 0.4);
      g.target = static_cast<double>(c);
      ds.graphs.push_back(std::move(g));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("tu loader: smallest valid dataset") {
  TempDir dir("tu1");
  write_file(dir.file("tiny_A.txt"), "1, 2\n2, 1\n");
  write_file(dir.file("tiny_graph_indicator.txt"), "1\n1\n");
  write_file(dir.file("tiny_graph_labels.txt"), "1\n");
  write_file(dir.file("tiny_node_labels.txt"), "1\n1\n");

  const DatasetTable ds = load_tu_dataset(dir.str(), "tiny");
  REQUIRE(ds.size() == 1);
  const Graph& g = ds.graphs[0];
  CHECK(g.n == 2);
  CHECK(g.adjacency.at(0, 1) == 1.0);
  CHECK(g.adjacency.at(1, 0) == 1.0);
  CHECK(g.adjacency.at(0, 0) == 0.0);
  CHECK(g.target == 0.0);          // label 1 remapped to 0
  CHECK(ds.d_in == 1);             // one distinct node label
  CHECK(g.node_features.at(0, 0) == 1.0);
}

TEST_CASE("tu loader: interleaved graph indicator") {
  TempDir dir("tu2");
  // Two graphs whose nodes alternate in the global numbering: graph 1 owns
  // nodes {1, 3}, graph 2 owns {2, 4}.
  write_file(dir.file("mix_A.txt"), "1, 3\n3, 1\n2, 4\n4, 2\n");
  write_file(dir.file("mix_graph_indicator.txt"), "1\n2\n1\n2\n");
  write_file(dir.file("mix_graph_labels.txt"), "5\n7\n");

  const DatasetTable ds = load_tu_dataset(dir.str(), "mix");
  REQUIRE(ds.size() == 2);
  CHECK(ds.class_count == 2);
  for (const Graph& g : ds.graphs) {
    CHECK(g.n == 2);
    CHECK(g.adjacency.at(0, 1) == 1.0);
    CHECK(g.adjacency.at(1, 0) == 1.0);
    CHECK(g.edges.size() == 1);
  }
  CHECK(ds.graphs[0].target == 0.0);
  CHECK(ds.graphs[1].target == 1.0);
  // no node labels/attributes -> degree one-hot, degree 1 for every node
  CHECK(ds.d_in == 64);
  CHECK(ds.graphs[0].node_features.at(0, 1) == 1.0);
}

TEST_CASE("tu loader: error reporting") {
  TempDir dir("tu3");
  write_file(dir.file("bad_A.txt"), "1, 2\n1, 99\n");
  write_file(dir.file("bad_graph_indicator.txt"), "1\n1\n");
  write_file(dir.file("bad_graph_labels.txt"), "1\n");

  CHECK_THROWS_WITH_AS(load_tu_dataset(dir.str(), "missing"),
                       doctest::Contains("missing_A.txt"), FormatError);
  try {
    load_tu_dataset(dir.str(), "bad");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
  }
}

TEST_CASE("tu loader: attributes take precedence and parse as floats") {
  TempDir dir("tu4");
  write_file(dir.file("att_A.txt"), "1, 2\n");
  write_file(dir.file("att_graph_indicator.txt"), "1\n1\n");
  write_file(dir.file("att_graph_labels.txt"), "0\n");
  write_file(dir.file("att_node_labels.txt"), "3\n4\n");
  write_file(dir.file("att_node_attributes.txt"), "0.5, -1.25, 3\n1.0, 2.0, -0.5\n");

  const DatasetTable ds = load_tu_dataset(dir.str(), "att");
  CHECK(ds.d_in == 3);
  CHECK(ds.graphs[0].node_features.at(0, 1) == -1.25);
  CHECK(ds.graphs[0].node_features.at(1, 2) == -0.5);
}

TEST_CASE("molecule loader: fixtures and errors") {
  TempDir dir("mol");
  const std::string path = dir.file("mols.jsonl");
  write_file(path,
             R"({"nodes": [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]], "edges": [[0, 1, [1.0]], [1, 2, [0.25]]], "target": -3.5})"
             "\n"
             R"({"nodes": [[0.1, 0.2]], "edges": [], "target": 1.25})"
             "\n");
  const DatasetTable ds = load_molecule_dataset(path);
  REQUIRE(ds.size() == 2);
  CHECK(ds.task == Task::regression);
  CHECK(ds.d_in == 2);
  CHECK(ds.d_e == 1);

  // 3-node fixture with 2 edges: 4 nonzeros after mirroring
  const Graph& g = ds.graphs[0];
  std::int64_t nonzeros = 0;
  for (double v : g.adjacency.data()) nonzeros += v != 0.0 ? 1 : 0;
  CHECK(nonzeros == 4);
  CHECK(g.edge_features.at(1, 0) == 0.25);

  // single-atom molecule with zero edges
  CHECK(ds.graphs[1].n == 1);
  CHECK(ds.graphs[1].edges.empty());

  // malformed line reports its number
  const std::string bad = dir.file("bad.jsonl");
  write_file(bad, "{\"nodes\": [[1.0]], \"edges\": [], \"target\": 0}\nnot json\n");
  try {
    load_molecule_dataset(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  // inconsistent feature dims across records
  const std::string dims = dir.file("dims.jsonl");
  write_file(dims,
             "{\"nodes\": [[1.0]], \"edges\": [], \"target\": 0}\n"
             "{\"nodes\": [[1.0, 2.0]], \"edges\": [], \"target\": 1}\n");
  CHECK_THROWS_AS(load_molecule_dataset(dims), FormatError);

  // duplicate undirected edge
  const std::string dup = dir.file("dup.jsonl");
  write_file(dup,
             R"({"nodes": [[1.0], [2.0]], "edges": [[0, 1, [1.0]], [1, 0, [1.0]]], "target": 0})"
             "\n");
  CHECK_THROWS_AS(load_molecule_dataset(dup), FormatError);
}

TEST_CASE("molecule loader: integral targets become classification") {
  TempDir dir("molcls");
  const std::string path = dir.file("cls.jsonl");
  write_file(path,
             "{\"nodes\": [[1.0]], \"edges\": [], \"target\": 0}\n"
             "{\"nodes\": [[2.0]], \"edges\": [], \"target\": 1}\n"
             "{\"nodes\": [[3.0]], \"edges\": [], \"target\": 1}\n");
  const DatasetTable ds = load_molecule_dataset(path);
  CHECK(ds.task == Task::binary);
  CHECK(ds.class_count == 2);
}

TEST_CASE("molecule round-trip preserves the table") {
  TempDir dir("rt");
  const std::string path = dir.file("orig.jsonl");
  write_file(path,
             R"({"nodes": [[1.5, -0.25], [0.125, 3.0]], "edges": [[0, 1, [0.1, 0.9]]], "target": -1.526})"
             "\n"
             R"({"nodes": [[0.0, 1e-3]], "edges": [], "target": 2.75})"
             "\n");
  const DatasetTable ds = load_molecule_dataset(path);
  const std::string again = dir.file("again.jsonl");
  save_molecule_dataset(ds, again);
  const DatasetTable ds2 = load_molecule_dataset(again);
  CHECK(ds == ds2);
}

TEST_CASE("loaded graphs satisfy symmetry and zero-diagonal invariants") {
  TempDir dir("inv");
  const std::string path = dir.file("m.jsonl");
  write_file(path,
             R"({"nodes": [[1.0], [2.0], [3.0], [4.0]], "edges": [[2, 0, [1.0]], [3, 1, [2.0]], [0, 1, [3.0]]], "target": 0.5})"
             "\n");
  const DatasetTable ds = load_molecule_dataset(path);
  for (const Graph& g : ds.graphs) {
    for (std::int64_t i = 0; i < g.n; ++i) {
      CHECK(g.adjacency.at(i, i) == 0.0);
      for (std::int64_t j = 0; j < g.n; ++j) CHECK(g.adjacency.at(i, j) == g.adjacency.at(j, i));
    }
  }
}

TEST_CASE("stratified kfold: folds of 60 on a 600-graph 6-class table") {
  const DatasetTable ds = synthetic_classification(100, 6, 1);
  const FoldSplit split = stratified_kfold(ds, 10, 7);
  for (std::int64_t f = 0; f < 10; ++f) {
    CHECK(split.fold_indices(f).size() == 60);
  }
}

TEST_CASE("stratified kfold: k=2 on 4 graphs, 2 per class") {
  const DatasetTable ds = synthetic_classification(2, 2, 3);
  const FoldSplit split = stratified_kfold(ds, 2, 11);
  for (std::int64_t f = 0; f < 2; ++f) {
    const auto idx = split.fold_indices(f);
    REQUIRE(idx.size() == 2);
    std::set<double> classes;
    for (auto i : idx) classes.insert(ds.graphs[static_cast<std::size_t>(i)].target);
    CHECK(classes.size() == 2);
  }
}

TEST_CASE("stratified kfold: determinism, partition and stratification bound") {
  const DatasetTable ds = synthetic_classification(7, 3, 5);  // 21 graphs, remainders
  const FoldSplit a = stratified_kfold(ds, 4, 99);
  const FoldSplit b = stratified_kfold(ds, 4, 99);
  CHECK(a.assignments == b.assignments);
  CHECK(stratified_kfold(ds, 4, 100).assignments != a.assignments);

  // union = dataset, disjoint by construction of assignments
  std::int64_t total = 0;
  for (std::int64_t f = 0; f < 4; ++f) total += static_cast<std::int64_t>(a.fold_indices(f).size());
  CHECK(total == ds.size());

  // per-fold class counts within +-1 of the even split
  for (std::int64_t f = 0; f < 4; ++f) {
    for (std::int64_t c = 0; c < 3; ++c) {
      std::int64_t count = 0;
      for (auto i : a.fold_indices(f)) {
        if (ds.graphs[static_cast<std::size_t>(i)].target == static_cast<double>(c)) ++count;
      }
      CHECK(count >= 7 / 4);
      CHECK(count <= 7 / 4 + 1);
    }
  }

  CHECK_THROWS_AS(stratified_kfold(ds, 1, 0), ContractError);
  CHECK_THROWS_AS(stratified_kfold(ds, 8, 0), ContractError);  // class of 7 < k
}

TEST_CASE("batch_graphs: masks, padding and errors") {
  DatasetTable ds;
  ds.task = Task::binary;
  ds.class_count = 2;
  ds.d_in = 4;
  ds.graphs.push_back(make_graph(2, {{0, 1}}, 0.0));
  ds.graphs.push_back(make_graph(3, {{0, 1}, {1, 2}}, 1.0));
  ds.graphs.push_back(make_graph(4, {{0, 1}, {2, 3}}, 0.0));

  // exact fit: mask all-true
  std::vector<Tensor> topo(3);
  for (std::size_t i = 0; i < 3; ++i) {
    topo[i] = Tensor({ds.graphs[i].n, 4});
    for (auto& v : topo[i].data()) v = 0.5;
  }
  const GraphBatch exact = batch_graphs(ds, {2}, 4, BatchMode::gmn, &topo);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(exact.node_mask.at(i) == 1.0);

  // padding masks per the definition
  const GraphBatch two = batch_graphs(ds, {0, 1}, 4, BatchMode::memgnn);
  CHECK(two.node_mask.at(0 * 4 + 0) == 1.0);
  CHECK(two.node_mask.at(0 * 4 + 1) == 1.0);
  CHECK(two.node_mask.at(0 * 4 + 2) == 0.0);
  CHECK(two.node_mask.at(0 * 4 + 3) == 0.0);
  CHECK(two.node_mask.at(1 * 4 + 2) == 1.0);
  CHECK(two.node_mask.at(1 * 4 + 3) == 0.0);

  // padded rows are exactly zero everywhere
  std::vector<Tensor> topo6;
  for (const Graph& g : ds.graphs) {
    topo6.push_back(Tensor({g.n, 6}));
    for (auto& v : topo6.back().data()) v = 1.0;
  }
  const GraphBatch padded = batch_graphs(ds, {0, 1, 2}, 6, BatchMode::gmn, &topo6);
  for (std::int64_t b = 0; b < padded.size; ++b) {
    for (std::int64_t i = padded.true_n[static_cast<std::size_t>(b)]; i < 6; ++i) {
      CHECK(padded.node_mask.at(b * 6 + i) == 0.0);
      for (std::int64_t c = 0; c < 4; ++c) CHECK(padded.node_feats.at(b, i, c) == 0.0);
      for (std::int64_t c = 0; c < 6; ++c) {
        CHECK(padded.adjacency.at(b, i, c) == 0.0);
        CHECK(padded.topo_embed.at(b, i, c) == 0.0);
      }
    }
  }

  // oversized graph names its index
  CHECK_THROWS_WITH_AS(batch_graphs(ds, {0, 2}, 3, BatchMode::memgnn),
                       doctest::Contains("graph 2"), ContractError);

  // memgnn edge mirroring
  CHECK(two.edges[1].src.size() == 4);
  CHECK(two.edges[1].src[0] == 0);
  CHECK(two.edges[1].dst[0] == 1);
  CHECK(two.edges[1].src[1] == 1);
  CHECK(two.edges[1].dst[1] == 0);
}
