#include <doctest.h>

#include <algorithm>
#include <set>

#include "graphmem/diffusion.hpp"
#include "graphmem/error.hpp"
#include "test_util.hpp"

using namespace graphmem;
using namespace graphmem::testutil;

namespace {

// Brute-force oracle: S = (1-p) * inv(I - p*At).
Tensor rwr_by_inverse(const Tensor& atilde, double p) {
  const std::int64_t n = atilde.rows();
  Tensor system({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      system.at(i, j) = (i == j ? 1.0 : 0.0) - p * atilde.at(i, j);
  Tensor inv = gauss_jordan_inverse(system);
  for (auto& v : inv.data()) v *= (1.0 - p);
  return inv;
}

std::multiset<std::vector<double>> row_multiset(const Tensor& t) {
  std::multiset<std::vector<double>> rows;
  for (std::int64_t i = 0; i < t.rows(); ++i) {
    std::vector<double> row;
    for (std::int64_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
    rows.insert(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("normalize_adjacency: examples") {
  // isolated node gets a self-loop
  const Tensor single = normalize_adjacency(Tensor({1, 1}));
  CHECK(single.at(0, 0) == 1.0);

  // path graph 1-2-3: columns sum to exactly 1; middle column is [0.5, 0, 0.5]
  const Graph path = make_graph(3, {{0, 1}, {1, 2}});
  const Tensor norm = normalize_adjacency(path.adjacency);
  for (std::int64_t j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < 3; ++i) sum += norm.at(i, j);
    CHECK(sum == 1.0);
  }
  CHECK(norm.at(0, 1) == 0.5);
  CHECK(norm.at(1, 1) == 0.0);
  CHECK(norm.at(2, 1) == 0.5);

  Tensor diag({2, 2});
  diag.at(0, 0) = 1.0;
  CHECK_THROWS_AS(normalize_adjacency(diag), ContractError);
  Tensor asym({2, 2});
  asym.at(0, 1) = 1.0;
  CHECK_THROWS_AS(normalize_adjacency(asym), ContractError);
}

TEST_CASE("rwr_scores: examples") {
  // single node
  const Tensor s1 = rwr_scores(normalize_adjacency(Tensor({1, 1})), 0.1);
  CHECK(s1.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  // p -> 0 limit approaches the identity
  const Graph path = make_graph(3, {{0, 1}, {1, 2}});
  const Tensor near_id = rwr_scores(normalize_adjacency(path.adjacency), 1e-9);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      CHECK(near_id.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));

  // path-3 against the dense-inverse oracle
  const Tensor atilde = normalize_adjacency(path.adjacency);
  const Tensor s = rwr_scores(atilde, 0.1);
  const Tensor oracle = rwr_by_inverse(atilde, 0.1);
  for (std::int64_t i = 0; i < s.numel(); ++i) {
    CHECK(std::abs(s.at(i) - oracle.at(i)) < 1e-10);
  }

  CHECK_THROWS_AS(rwr_scores(atilde, 0.0), ContractError);
  CHECK_THROWS_AS(rwr_scores(atilde, 1.0), ContractError);
}

TEST_CASE("rwr_scores: oracle match, stochastic columns, solver agreement") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.uniform_int(29));
    const Graph g = random_graph(rng, n, 0.3);
    const Tensor atilde = normalize_adjacency(g.adjacency);
    const Tensor direct = rwr_scores(atilde, 0.1);
    const Tensor oracle = rwr_by_inverse(atilde, 0.1);
    for (std::int64_t i = 0; i < direct.numel(); ++i) {
      CHECK(std::abs(direct.at(i) - oracle.at(i)) < 1e-8);
      CHECK(direct.at(i) >= -1e-15);
    }
    for (std::int64_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < n; ++i) sum += direct.at(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-8);
    }
    // power iteration agrees with the direct solve
    const Tensor power = rwr_scores(atilde, 0.1, /*force_power_iteration=*/true);
    for (std::int64_t i = 0; i < direct.numel(); ++i) {
      CHECK(std::abs(direct.at(i) - power.at(i)) < 1e-8);
    }
  }
}

TEST_CASE("rwr_scores: power iteration reports non-convergence") {
  const Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
  const Tensor atilde = normalize_adjacency(g.adjacency);
  CHECK_THROWS_AS(rwr_scores(atilde, 0.9, true, 1e-14, 3), ConvergenceError);
}

TEST_CASE("topological_embedding: symmetric cycle and proposition-style invariance") {
  DiffusionConfig cfg;
  cfg.variant = DiffusionVariant::rwr;

  // 3-cycle is vertex transitive: all rows identical after sorting
  const Graph cycle = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  const Tensor emb = topological_embedding(cycle, cfg, 5);
  CHECK(emb.rows() == 3);
  CHECK(emb.cols() == 5);
  for (std::int64_t i = 1; i < 3; ++i)
    for (std::int64_t j = 0; j < 5; ++j)
      CHECK(emb.at(i, j) == doctest::Approx(emb.at(0, j)).epsilon(1e-12));

  // multiset of rows invariant under node permutation (100 permutations)
  Rng rng(31);
  const Graph base = random_graph(rng, 7, 0.4);
  const Tensor base_emb = topological_embedding(base, cfg, 7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto perm = random_permutation(rng, 7);
    const Graph shuffled = permute_graph(base, perm);
    const Tensor emb2 = topological_embedding(shuffled, cfg, 7);
    // permuted copy's row i' = perm[i] must equal original row i (up to solver noise)
    for (std::int64_t i = 0; i < 7; ++i) {
      for (std::int64_t j = 0; j < 7; ++j) {
        CHECK(emb2.at(perm[static_cast<std::size_t>(i)], j) ==
              doctest::Approx(base_emb.at(i, j)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("topological_embedding: star graph rows differ by role (adjacency variant)") {
  DiffusionConfig cfg;
  cfg.variant = DiffusionVariant::adjacency;
  const Graph star = make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
  const Tensor emb = topological_embedding(star, cfg, 4);
  // center: sorted degree row [1,1,1,0]; leaf: [1,0,0,0]
  CHECK(emb.at(0, 0) == 1.0);
  CHECK(emb.at(0, 2) == 1.0);
  CHECK(emb.at(0, 3) == 0.0);
  CHECK(emb.at(1, 0) == 1.0);
  CHECK(emb.at(1, 1) == 0.0);

  // unsorted keeps raw adjacency rows
  const Tensor raw = topological_embedding(star, cfg, 4, /*sort_rows=*/false);
  CHECK(raw.at(1, 0) == 1.0);
  CHECK(raw.at(1, 1) == 0.0);
  CHECK(raw.at(0, 1) == 1.0);
}

TEST_CASE("downsample_edges: identity, exact count, rwr ranking") {
  Rng rng(8);
  const Graph g = random_graph(rng, 20, 0.5);
  const Graph same = downsample_edges(g, 1.0, DownsampleMethod::random, 3);
  CHECK(same == g);

  // a fixture with exactly 100 edges -> exactly 10 survive at ratio 0.1
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::int64_t u = 0, v = 1;
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < 30 && count < 100; ++i) {
    for (std::int64_t j = i + 1; j < 30 && count < 100; ++j) {
      edges.push_back({i, j});
      ++count;
    }
  }
  (void)u;
  (void)v;
  const Graph dense = make_graph(30, edges);
  REQUIRE(dense.edges.size() == 100);
  const Graph sampled = downsample_edges(dense, 0.1, DownsampleMethod::random, 4);
  CHECK(sampled.edges.size() == 10);
  CHECK(sampled.n == dense.n);

  // determinism + no invented edges
  const Graph sampled2 = downsample_edges(dense, 0.1, DownsampleMethod::random, 4);
  CHECK(sampled == sampled2);
  for (const EdgePair& e : sampled.edges) {
    CHECK(dense.adjacency.at(e.u, e.v) == 1.0);
  }

  // star, rwr_rank, ratio 0.34: every leaf keeps its only neighbor; connected
  const Graph star = make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
  const Graph kept = downsample_edges(star, 0.34, DownsampleMethod::rwr_rank, 0);
  CHECK(kept.n == 4);
  for (std::int64_t leaf = 1; leaf < 4; ++leaf) {
    CHECK(kept.adjacency.at(0, leaf) == 1.0);
  }

  CHECK_THROWS_AS(downsample_edges(g, 0.0, DownsampleMethod::random, 0), ContractError);
  CHECK_THROWS_AS(downsample_edges(g, 1.5, DownsampleMethod::random, 0), ContractError);
}

TEST_CASE("diffusion cache round trip and key mismatch") {
  TempDir dir("cache");
  Rng rng(55);
  DiffusionConfig cfg;
  std::vector<Tensor> mats;
  for (int i = 0; i < 3; ++i) {
    const Graph g = random_graph(rng, 4 + i, 0.5);
    mats.push_back(diffusion_matrix(g, cfg));
  }
  const std::string path = diffusion_cache_file(dir.str(), "toy", cfg);
  write_diffusion_cache(path, "toy", cfg, mats);

  const auto loaded = read_diffusion_cache(path, "toy", cfg, 3);
  REQUIRE(loaded.has_value());
  REQUIRE(loaded->size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((*loaded)[i].data() == mats[i].data());  // bit-exact
  }

  CHECK(!read_diffusion_cache(dir.file("absent.diff"), "toy", cfg, 3).has_value());
  DiffusionConfig other = cfg;
  other.restart_prob = 0.5;
  CHECK_THROWS_AS(read_diffusion_cache(path, "toy", other, 3), FormatError);
  CHECK_THROWS_AS(read_diffusion_cache(path, "toy", cfg, 4), FormatError);
}
