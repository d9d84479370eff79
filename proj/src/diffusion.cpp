#include "graphmem/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "graphmem/error.hpp"
#include "graphmem/rng.hpp"

namespace graphmem {

namespace {

using nlohmann::json;

constexpr std::int64_t kDirectSolveMaxN = 1024;
constexpr char kCacheMagic[8] = {'G', 'M', 'D', 'I', 'F', 'F', '0', '1'};

// LU factorization with partial pivoting, then one solve per RHS column.
// (I - p*At) is strictly column diagonally dominant for p < 1, so the
// factorization cannot break down.
Tensor lu_solve_columns(Tensor m, const Tensor& rhs) {
  const std::int64_t n = m.rows();
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::int64_t col = 0; col < n; ++col) {
    std::int64_t pivot = col;
    double best = std::abs(m.at(col, col));
    for (std::int64_t r = col + 1; r < n; ++r) {
      const double v = std::abs(m.at(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0) throw NumericError("rwr_scores: singular system");
    if (pivot != col) {
      for (std::int64_t c = 0; c < n; ++c) std::swap(m.at(col, c), m.at(pivot, c));
      std::swap(perm[static_cast<std::size_t>(col)], perm[static_cast<std::size_t>(pivot)]);
    }
    const double d = m.at(col, col);
    for (std::int64_t r = col + 1; r < n; ++r) {
      const double f = m.at(r, col) / d;
      m.at(r, col) = f;
      if (f == 0.0) continue;
      for (std::int64_t c = col + 1; c < n; ++c) m.at(r, c) -= f * m.at(col, c);
    }
  }

  Tensor out({n, rhs.cols()});
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::int64_t col = 0; col < rhs.cols(); ++col) {
    for (std::int64_t r = 0; r < n; ++r) {
      double acc = rhs.at(perm[static_cast<std::size_t>(r)], col);
      for (std::int64_t c = 0; c < r; ++c) acc -= m.at(r, c) * y[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = acc;
    }
    for (std::int64_t r = n - 1; r >= 0; --r) {
      double acc = y[static_cast<std::size_t>(r)];
      for (std::int64_t c = r + 1; c < n; ++c) acc -= m.at(r, c) * out.at(c, col);
      out.at(r, col) = acc / m.at(r, r);
    }
  }
  return out;
}

}  // namespace

std::string diffusion_variant_name(DiffusionVariant v) {
  switch (v) {
    case DiffusionVariant::rwr: return "rwr";
    case DiffusionVariant::adjacency: return "adjacency";
    case DiffusionVariant::normalized_adjacency: return "normalized_adjacency";
  }
  return "unknown";
}

DiffusionVariant diffusion_variant_from_name(const std::string& name) {
  if (name == "rwr") return DiffusionVariant::rwr;
  if (name == "adjacency") return DiffusionVariant::adjacency;
  if (name == "normalized_adjacency") return DiffusionVariant::normalized_adjacency;
  throw ConfigError("unknown embedding variant '" + name + "'");
}

void DiffusionConfig::validate() const {
  if (!(restart_prob > 0.0 && restart_prob < 1.0)) {
    throw ConfigError("restart_prob must lie in (0, 1)");
  }
  if (!(tol > 0.0)) throw ConfigError("diffusion tol must be positive");
  if (max_iter < 1) throw ConfigError("diffusion max_iter must be positive");
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  const std::int64_t n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("normalize_adjacency: matrix must be square");
  Tensor a = adjacency;
  for (std::int64_t i = 0; i < n; ++i) {
    if (a.at(i, i) != 0.0) throw ContractError("normalize_adjacency: nonzero diagonal");
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (a.at(i, j) != a.at(j, i)) throw ContractError("normalize_adjacency: input not symmetric");
    }
  }
  // Self-loop for isolated nodes so every column has mass.
  for (std::int64_t j = 0; j < n; ++j) {
    double colsum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) colsum += a.at(i, j);
    if (colsum == 0.0) {
      a.at(j, j) = 1.0;
      colsum = 1.0;
    }
    for (std::int64_t i = 0; i < n; ++i) a.at(i, j) /= colsum;
  }
  return a;
}

Tensor rwr_scores(const Tensor& atilde, double restart_prob, bool force_power_iteration,
                  double tol, std::int64_t max_iter) {
  if (!(restart_prob > 0.0 && restart_prob < 1.0)) {
    throw ContractError("rwr_scores: restart probability must lie in (0, 1)");
  }
  const std::int64_t n = atilde.rows();
  if (atilde.cols() != n) throw ShapeError("rwr_scores: matrix must be square");
  const double p = restart_prob;

  if (!force_power_iteration && n <= kDirectSolveMaxN) {
    Tensor system({n, n});
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        system.at(i, j) = (i == j ? 1.0 : 0.0) - p * atilde.at(i, j);
      }
    }
    Tensor rhs({n, n});
    for (std::int64_t i = 0; i < n; ++i) rhs.at(i, i) = 1.0 - p;
    return lu_solve_columns(std::move(system), rhs);
  }

  // Power iteration per column: t <- p*At*t + (1-p)*e_i.
  Tensor scores({n, n});
  std::vector<double> t(static_cast<std::size_t>(n));
  std::vector<double> next(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    std::fill(t.begin(), t.end(), 0.0);
    t[static_cast<std::size_t>(i)] = 1.0;
    double residual = 0.0;
    bool converged = false;
    for (std::int64_t it = 0; it < max_iter; ++it) {
      for (std::int64_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < n; ++c) acc += atilde.at(r, c) * t[static_cast<std::size_t>(c)];
        next[static_cast<std::size_t>(r)] = p * acc;
      }
      next[static_cast<std::size_t>(i)] += 1.0 - p;
      residual = 0.0;
      for (std::int64_t r = 0; r < n; ++r) {
        residual += std::abs(next[static_cast<std::size_t>(r)] - t[static_cast<std::size_t>(r)]);
      }
      t.swap(next);
      if (residual < tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream os;
      os << "rwr_scores: power iteration for column " << i << " did not reach tol " << tol
         << " within " << max_iter << " iterations (residual " << residual << ")";
      throw ConvergenceError(os.str());
    }
    for (std::int64_t r = 0; r < n; ++r) scores.at(r, i) = t[static_cast<std::size_t>(r)];
  }
  return scores;
}

Tensor diffusion_matrix(const Graph& g, const DiffusionConfig& cfg) {
  cfg.validate();
  switch (cfg.variant) {
    case DiffusionVariant::adjacency: return g.adjacency;
    case DiffusionVariant::normalized_adjacency: return normalize_adjacency(g.adjacency);
    case DiffusionVariant::rwr:
      return rwr_scores(normalize_adjacency(g.adjacency), cfg.restart_prob,
                        cfg.force_power_iteration, cfg.tol, cfg.max_iter);
  }
  throw ConfigError("diffusion_matrix: unknown variant");
}

Tensor topological_embedding_from_matrix(const Tensor& mat, const DiffusionConfig& cfg,
                                         std::int64_t n_max, bool sort_rows) {
  const std::int64_t n = mat.rows();
  if (n > n_max) throw ContractError("topological_embedding: graph larger than n_max");
  Tensor out({n, n_max});
  std::vector<double> row(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      // Row i of the matrix for adjacency variants, row i of S^T (= column i
      // of S, the relevance of every node w.r.t. node i) for RWR.
      row[static_cast<std::size_t>(j)] =
          cfg.variant == DiffusionVariant::rwr ? mat.at(j, i) : mat.at(i, j);
    }
    if (sort_rows) std::sort(row.begin(), row.end(), std::greater<double>());
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

Tensor topological_embedding(const Graph& g, const DiffusionConfig& cfg, std::int64_t n_max,
                             bool sort_rows) {
  return topological_embedding_from_matrix(diffusion_matrix(g, cfg), cfg, n_max, sort_rows);
}

Graph downsample_edges(const Graph& g, double ratio, DownsampleMethod method,
                       std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ContractError("downsample_edges: ratio must lie in (0, 1]");
  }
  if (ratio == 1.0 || g.edges.empty()) return g;

  const std::int64_t e = static_cast<std::int64_t>(g.edges.size());
  std::vector<char> keep(static_cast<std::size_t>(e), 0);

  if (method == DownsampleMethod::random) {
    const std::int64_t target = static_cast<std::int64_t>(
        std::ceil(ratio * static_cast<double>(e)));
    std::vector<std::int64_t> order(static_cast<std::size_t>(e));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(seed).fork(rng_tag("downsample"));
    rng.shuffle(order);
    for (std::int64_t i = 0; i < target; ++i) keep[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  } else {
    const Tensor scores = rwr_scores(normalize_adjacency(g.adjacency), 0.1);
    // Edge index lookup per node pair.
    std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> nbrs(
        static_cast<std::size_t>(g.n));  // (neighbor, edge index)
    for (std::int64_t ei = 0; ei < e; ++ei) {
      nbrs[static_cast<std::size_t>(g.edges[static_cast<std::size_t>(ei)].u)].push_back(
          {g.edges[static_cast<std::size_t>(ei)].v, ei});
      nbrs[static_cast<std::size_t>(g.edges[static_cast<std::size_t>(ei)].v)].push_back(
          {g.edges[static_cast<std::size_t>(ei)].u, ei});
    }
    for (std::int64_t i = 0; i < g.n; ++i) {
      auto& list = nbrs[static_cast<std::size_t>(i)];
      if (list.empty()) continue;
      const std::int64_t quota = static_cast<std::int64_t>(
          std::ceil(ratio * static_cast<double>(list.size())));
      // Rank neighbors by relevance w.r.t. node i (column i of S); ties
      // break on node index for determinism.
      std::sort(list.begin(), list.end(),
                [&](const auto& a, const auto& b) {
                  const double sa = scores.at(a.first, i);
                  const double sb = scores.at(b.first, i);
                  if (sa != sb) return sa > sb;
                  return a.first < b.first;
                });
      for (std::int64_t r = 0; r < quota && r < static_cast<std::int64_t>(list.size()); ++r) {
        keep[static_cast<std::size_t>(list[static_cast<std::size_t>(r)].second)] = 1;
      }
    }
  }

  Graph out;
  out.n = g.n;
  out.target = g.target;
  out.adjacency = Tensor({g.n, g.n});
  out.node_features = g.node_features;
  const bool has_edge_feats = g.edge_features.numel() > 0;
  std::vector<std::vector<double>> kept_feats;
  for (std::int64_t ei = 0; ei < e; ++ei) {
    if (!keep[static_cast<std::size_t>(ei)]) continue;
    const EdgePair& edge = g.edges[static_cast<std::size_t>(ei)];
    out.edges.push_back(edge);
    out.adjacency.at(edge.u, edge.v) = 1.0;
    out.adjacency.at(edge.v, edge.u) = 1.0;
    if (has_edge_feats) {
      std::vector<double> row(static_cast<std::size_t>(g.edge_features.cols()));
      for (std::int64_t c = 0; c < g.edge_features.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = g.edge_features.at(ei, c);
      }
      kept_feats.push_back(std::move(row));
    }
  }
  if (has_edge_feats) {
    out.edge_features =
        Tensor({static_cast<std::int64_t>(kept_feats.size()), g.edge_features.cols()});
    for (std::size_t r = 0; r < kept_feats.size(); ++r) {
      for (std::int64_t c = 0; c < g.edge_features.cols(); ++c) {
        out.edge_features.at(static_cast<std::int64_t>(r), c) = kept_feats[r][static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

// --- Cache -------------------------------------------------------------------

std::string diffusion_cache_file(const std::string& cache_dir, const std::string& dataset,
                                 const DiffusionConfig& cfg) {
  std::ostringstream os;
  os << cache_dir << "/" << dataset << "." << diffusion_variant_name(cfg.variant);
  if (cfg.variant == DiffusionVariant::rwr) os << ".p" << cfg.restart_prob;
  os << ".diff";
  return os.str();
}

void write_diffusion_cache(const std::string& path, const std::string& dataset,
                           const DiffusionConfig& cfg, const std::vector<Tensor>& matrices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write cache file " + path);
  json header;
  header["version"] = 1;
  header["dataset"] = dataset;
  header["variant"] = diffusion_variant_name(cfg.variant);
  header["restart_prob"] = cfg.restart_prob;
  header["count"] = matrices.size();
  json sizes = json::array();
  for (const Tensor& m : matrices) sizes.push_back(m.rows());
  header["sizes"] = std::move(sizes);
  const std::string hs = header.dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Tensor& m : matrices) {
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(sizeof(double) * m.data().size()));
  }
  if (!out) throw FormatError("short write on cache file " + path);
}

std::optional<std::vector<Tensor>> read_diffusion_cache(const std::string& path,
                                                        const std::string& dataset,
                                                        const DiffusionConfig& cfg,
                                                        std::int64_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw FormatError(path + ": not a diffusion cache file");
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
  if (header.value("version", 0) != 1) throw FormatError(path + ": unsupported cache version");
  if (header.value("dataset", "") != dataset ||
      header.value("variant", "") != diffusion_variant_name(cfg.variant) ||
      (cfg.variant == DiffusionVariant::rwr &&
       header.value("restart_prob", -1.0) != cfg.restart_prob)) {
    throw FormatError(path + ": cache header does not match requested key");
  }
  if (static_cast<std::int64_t>(header.value("count", 0)) != expected_count) {
    throw FormatError(path + ": cache holds a different graph count");
  }
  std::vector<Tensor> out;
  for (const auto& sz : header["sizes"]) {
    const std::int64_t n = sz.get<std::int64_t>();
    Tensor m({n, n});
    in.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(sizeof(double) * m.data().size()));
    if (!in) throw FormatError(path + ": truncated matrix data");
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace graphmem
