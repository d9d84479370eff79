#include "graphmem/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

std::vector<double> parse_csv_doubles(const std::string& line, const std::string& file,
                                      std::size_t lineno) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    std::string tok = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t idx = 0;
    try {
      out.push_back(std::stod(tok, &idx));
    } catch (const std::exception&) {
      throw FormatError(file + ":" + std::to_string(lineno) + ": expected number, got '" + tok +
                        "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::int64_t parse_int_token(const std::string& tok, const std::string& file, std::size_t lineno) {
  try {
    return static_cast<std::int64_t>(std::stoll(tok));
  } catch (const std::exception&) {
    throw FormatError(file + ":" + std::to_string(lineno) + ": expected integer, got '" + tok +
                      "'");
  }
}

// Remaps arbitrary integer labels to contiguous 0-based ids (sorted order).
std::map<std::int64_t, std::int64_t> label_remap(const std::vector<std::int64_t>& labels) {
  std::set<std::int64_t> distinct(labels.begin(), labels.end());
  std::map<std::int64_t, std::int64_t> remap;
  std::int64_t next = 0;
  for (std::int64_t l : distinct) remap[l] = next++;
  return remap;
}

Task classification_task(std::int64_t class_count) {
  return class_count <= 2 ? Task::binary : Task::multiclass;
}

}  // namespace

DatasetTable load_tu_dataset(const std::string& dir_path, const std::string& name,
                             const TuLoadOptions& options) {
  const std::string prefix = (fs::path(dir_path) / name).string() + "_";
  const std::string a_file = prefix + "A.txt";
  const std::string ind_file = prefix + "graph_indicator.txt";
  const std::string lab_file = prefix + "graph_labels.txt";
  for (const std::string& f : {a_file, ind_file, lab_file}) {
    if (!fs::exists(f)) throw FormatError("missing mandatory file " + f);
  }

  // Node -> graph assignment (file is 1-indexed in both directions).
  std::vector<std::int64_t> node_graph;
  {
    const auto lines = read_lines(ind_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      node_graph.push_back(parse_int_token(lines[i], ind_file, i + 1) - 1);
    }
  }
  const std::int64_t total_nodes = static_cast<std::int64_t>(node_graph.size());
  std::int64_t num_graphs = 0;
  for (std::int64_t g : node_graph) num_graphs = std::max(num_graphs, g + 1);
  for (std::size_t i = 0; i < node_graph.size(); ++i) {
    if (node_graph[i] < 0 || node_graph[i] >= num_graphs) {
      throw FormatError(ind_file + ":" + std::to_string(i + 1) + ": graph id out of range");
    }
  }

  std::vector<std::int64_t> graph_size(static_cast<std::size_t>(num_graphs), 0);
  std::vector<std::int64_t> node_local(node_graph.size());
  for (std::size_t i = 0; i < node_graph.size(); ++i) {
    node_local[i] = graph_size[static_cast<std::size_t>(node_graph[i])]++;
  }

  // Graph labels.
  std::vector<std::int64_t> raw_labels;
  {
    const auto lines = read_lines(lab_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      raw_labels.push_back(parse_int_token(lines[i], lab_file, i + 1));
    }
  }
  if (static_cast<std::int64_t>(raw_labels.size()) != num_graphs) {
    throw FormatError(lab_file + ": expected " + std::to_string(num_graphs) + " labels, got " +
                      std::to_string(raw_labels.size()));
  }
  const auto remap = label_remap(raw_labels);
  const std::int64_t class_count = static_cast<std::int64_t>(remap.size());

  // Node features: attributes > labels > degree one-hot.
  const std::string attr_file = prefix + "node_attributes.txt";
  const std::string nlab_file = prefix + "node_labels.txt";
  std::vector<std::vector<double>> attributes;
  std::vector<std::int64_t> node_labels;
  bool has_attrs = fs::exists(attr_file);
  bool has_nlabels = fs::exists(nlab_file);
  if (has_attrs) {
    const auto lines = read_lines(attr_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      attributes.push_back(parse_csv_doubles(lines[i], attr_file, i + 1));
      if (attributes.size() > 1 && attributes.back().size() != attributes.front().size()) {
        throw FormatError(attr_file + ":" + std::to_string(i + 1) +
                          ": inconsistent attribute count");
      }
    }
    if (static_cast<std::int64_t>(attributes.size()) != total_nodes) {
      throw FormatError(attr_file + ": expected " + std::to_string(total_nodes) + " rows");
    }
  } else if (has_nlabels) {
    const auto lines = read_lines(nlab_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      node_labels.push_back(parse_int_token(lines[i], nlab_file, i + 1));
    }
    if (static_cast<std::int64_t>(node_labels.size()) != total_nodes) {
      throw FormatError(nlab_file + ": expected " + std::to_string(total_nodes) + " rows");
    }
  }

  // Assemble graphs with zero features first, fill adjacency from the edge
  // file, then derive features (degree one-hot needs final degrees).
  DatasetTable ds;
  ds.name = name;
  ds.graphs.resize(static_cast<std::size_t>(num_graphs));
  for (std::int64_t g = 0; g < num_graphs; ++g) {
    Graph& graph = ds.graphs[static_cast<std::size_t>(g)];
    graph.n = graph_size[static_cast<std::size_t>(g)];
    graph.adjacency = Tensor({graph.n, graph.n});
    graph.target = static_cast<double>(remap.at(raw_labels[static_cast<std::size_t>(g)]));
  }

  {
    const auto lines = read_lines(a_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      const auto pair = parse_csv_doubles(lines[i], a_file, i + 1);
      if (pair.size() != 2) {
        throw FormatError(a_file + ":" + std::to_string(i + 1) + ": expected 'u, v'");
      }
      const std::int64_t u = static_cast<std::int64_t>(pair[0]) - 1;
      const std::int64_t v = static_cast<std::int64_t>(pair[1]) - 1;
      if (u < 0 || v < 0 || u >= total_nodes || v >= total_nodes) {
        throw FormatError(a_file + ":" + std::to_string(i + 1) + ": node index out of range");
      }
      if (node_graph[static_cast<std::size_t>(u)] != node_graph[static_cast<std::size_t>(v)]) {
        throw FormatError(a_file + ":" + std::to_string(i + 1) + ": edge spans two graphs");
      }
      if (u == v) continue;  // stored graphs keep a zero diagonal
      Graph& graph = ds.graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(u)])];
      const std::int64_t lu = node_local[static_cast<std::size_t>(u)];
      const std::int64_t lv = node_local[static_cast<std::size_t>(v)];
      graph.adjacency.at(lu, lv) = 1.0;
      graph.adjacency.at(lv, lu) = 1.0;
    }
  }

  for (Graph& graph : ds.graphs) {
    for (std::int64_t i = 0; i < graph.n; ++i) {
      for (std::int64_t j = i + 1; j < graph.n; ++j) {
        if (graph.adjacency.at(i, j) != 0.0) graph.edges.push_back({i, j});
      }
    }
  }

  if (has_attrs) {
    ds.d_in = static_cast<std::int64_t>(attributes.front().size());
    for (Graph& graph : ds.graphs) graph.node_features = Tensor({graph.n, ds.d_in});
    for (std::int64_t v = 0; v < total_nodes; ++v) {
      Graph& graph = ds.graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(v)])];
      const auto& row = attributes[static_cast<std::size_t>(v)];
      for (std::int64_t c = 0; c < ds.d_in; ++c) {
        graph.node_features.at(node_local[static_cast<std::size_t>(v)], c) =
            row[static_cast<std::size_t>(c)];
      }
    }
  } else if (has_nlabels) {
    const auto nremap = label_remap(node_labels);
    ds.d_in = static_cast<std::int64_t>(nremap.size());
    for (Graph& graph : ds.graphs) graph.node_features = Tensor({graph.n, ds.d_in});
    for (std::int64_t v = 0; v < total_nodes; ++v) {
      Graph& graph = ds.graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(v)])];
      graph.node_features.at(node_local[static_cast<std::size_t>(v)],
                             nremap.at(node_labels[static_cast<std::size_t>(v)])) = 1.0;
    }
  } else {
    // Degree one-hot with an overflow bucket; featurization choice for
    // attribute-free datasets, see repo docs.
    ds.d_in = options.max_degree_bucket;
    for (Graph& graph : ds.graphs) {
      graph.node_features = Tensor({graph.n, ds.d_in});
      for (std::int64_t i = 0; i < graph.n; ++i) {
        std::int64_t deg = 0;
        for (std::int64_t j = 0; j < graph.n; ++j) {
          if (graph.adjacency.at(i, j) != 0.0) ++deg;
        }
        graph.node_features.at(i, std::min(deg, ds.d_in - 1)) = 1.0;
      }
    }
  }

  ds.d_e = 0;
  ds.class_count = class_count;
  ds.task = classification_task(class_count);
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    validate_graph(ds.graphs[i], static_cast<std::int64_t>(i));
  }
  return ds;
}

DatasetTable load_molecule_dataset(const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) throw FormatError("cannot open " + file_path);

  DatasetTable ds;
  ds.name = fs::path(file_path).stem().string();
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> raw_targets;
  bool all_integral = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    const std::string where = file_path + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("nodes") || !rec.contains("edges") ||
        !rec.contains("target")) {
      throw FormatError(where + ": record must contain nodes, edges, target");
    }

    Graph g;
    const json& nodes = rec["nodes"];
    if (!nodes.is_array() || nodes.empty()) {
      throw FormatError(where + ": nodes must be a non-empty list");
    }
    g.n = static_cast<std::int64_t>(nodes.size());
    std::int64_t d_in = static_cast<std::int64_t>(nodes[0].size());
    g.node_features = Tensor({g.n, d_in});
    for (std::int64_t i = 0; i < g.n; ++i) {
      const json& row = nodes[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<std::int64_t>(row.size()) != d_in) {
        throw FormatError(where + ": inconsistent node feature dims");
      }
      for (std::int64_t c = 0; c < d_in; ++c) {
        if (!row[static_cast<std::size_t>(c)].is_number()) {
          throw FormatError(where + ": node features must be numbers");
        }
        g.node_features.at(i, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    if (ds.graphs.empty()) {
      ds.d_in = d_in;
    } else if (d_in != ds.d_in) {
      throw FormatError(where + ": node feature dim differs from earlier records");
    }

    const json& edges = rec["edges"];
    if (!edges.is_array()) throw FormatError(where + ": edges must be a list");
    g.adjacency = Tensor({g.n, g.n});
    std::int64_t d_e = -1;
    std::vector<std::vector<double>> feat_rows;
    for (const json& e : edges) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
          !e[1].is_number_integer() || !e[2].is_array()) {
        throw FormatError(where + ": edge entries must be [i, j, features]");
      }
      std::int64_t u = e[0].get<std::int64_t>();
      std::int64_t v = e[1].get<std::int64_t>();
      if (u < 0 || v < 0 || u >= g.n || v >= g.n || u == v) {
        throw FormatError(where + ": edge references invalid node indices");
      }
      if (u > v) std::swap(u, v);
      if (g.adjacency.at(u, v) != 0.0) {
        throw FormatError(where + ": duplicate undirected edge " + std::to_string(u) + "-" +
                          std::to_string(v));
      }
      g.adjacency.at(u, v) = 1.0;
      g.adjacency.at(v, u) = 1.0;
      g.edges.push_back({u, v});
      std::vector<double> feats;
      for (const json& f : e[2]) {
        if (!f.is_number()) throw FormatError(where + ": edge features must be numbers");
        feats.push_back(f.get<double>());
      }
      if (d_e < 0) d_e = static_cast<std::int64_t>(feats.size());
      if (static_cast<std::int64_t>(feats.size()) != d_e) {
        throw FormatError(where + ": inconsistent edge feature dims");
      }
      feat_rows.push_back(std::move(feats));
    }
    if (d_e < 0) d_e = ds.graphs.empty() ? 0 : ds.d_e;  // zero-edge molecule
    if (ds.graphs.empty()) {
      ds.d_e = d_e;
    } else if (d_e != ds.d_e) {
      throw FormatError(where + ": edge feature dim differs from earlier records");
    }
    if (ds.d_e > 0 || !feat_rows.empty()) {
      g.edge_features = Tensor({static_cast<std::int64_t>(feat_rows.size()), ds.d_e});
      for (std::size_t r = 0; r < feat_rows.size(); ++r) {
        for (std::int64_t c = 0; c < ds.d_e; ++c) {
          g.edge_features.at(static_cast<std::int64_t>(r), c) =
              feat_rows[r][static_cast<std::size_t>(c)];
        }
      }
    }

    const json& target = rec["target"];
    if (!target.is_number()) throw FormatError(where + ": target must be a number");
    const double t = target.get<double>();
    if (!target.is_number_integer() && std::floor(t) != t) all_integral = false;
    raw_targets.push_back(t);
    g.target = t;
    ds.graphs.push_back(std::move(g));
  }
  if (ds.graphs.empty()) throw FormatError(file_path + ": no records");

  if (all_integral) {
    std::vector<std::int64_t> labels;
    labels.reserve(raw_targets.size());
    for (double t : raw_targets) labels.push_back(static_cast<std::int64_t>(t));
    const auto remap = label_remap(labels);
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
      ds.graphs[i].target = static_cast<double>(remap.at(labels[i]));
    }
    ds.class_count = static_cast<std::int64_t>(remap.size());
    ds.task = classification_task(ds.class_count);
  } else {
    ds.class_count = 0;
    ds.task = Task::regression;
  }
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    validate_graph(ds.graphs[i], static_cast<std::int64_t>(i));
  }
  return ds;
}

void save_molecule_dataset(const DatasetTable& ds, const std::string& file_path) {
  std::ofstream out(file_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file_path);
  for (const Graph& g : ds.graphs) {
    json rec;
    json nodes = json::array();
    for (std::int64_t i = 0; i < g.n; ++i) {
      json row = json::array();
      for (std::int64_t c = 0; c < g.node_features.cols(); ++c) row.push_back(g.node_features.at(i, c));
      nodes.push_back(std::move(row));
    }
    rec["nodes"] = std::move(nodes);
    json edges = json::array();
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      json feats = json::array();
      if (g.edge_features.numel() > 0) {
        for (std::int64_t c = 0; c < g.edge_features.cols(); ++c) {
          feats.push_back(g.edge_features.at(static_cast<std::int64_t>(e), c));
        }
      }
      edges.push_back(json::array({g.edges[e].u, g.edges[e].v, std::move(feats)}));
    }
    rec["edges"] = std::move(edges);
    if (ds.task == Task::regression) {
      rec["target"] = g.target;
    } else {
      rec["target"] = static_cast<std::int64_t>(g.target);
    }
    out << rec.dump() << "\n";
  }
}

}  // namespace graphmem
