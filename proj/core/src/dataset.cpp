#include "mnagt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string_view>

#include "mnagt/rng.hpp"

namespace mnagt {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

long long parse_int(std::string_view token, const std::string& file, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError(file, line, "expected an integer, got '" + std::string(token) + "'");
  }
  return value;
}

/// Each non-blank line split on commas into integers. `width` is the number
/// of integers per line.
struct IntTable {
  std::vector<long long> values;
  std::vector<std::size_t> lines;  // source line per row
};

IntTable read_table(const fs::path& path, std::size_t width) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string file = path.string();
  IntTable table;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line = trim(text);
    if (line.empty()) continue;
    std::size_t fields = 0;
    while (true) {
      const auto comma = line.find(',');
      table.values.push_back(parse_int(line.substr(0, comma), file, line_no));
      ++fields;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (fields != width) {
      throw DataError(file, line_no, "expected " + std::to_string(width) + " value(s), got " +
                                         std::to_string(fields));
    }
    table.lines.push_back(line_no);
  }
  return table;
}

fs::path member(const fs::path& dir, const std::string& name, const char* suffix) {
  return dir / (name + suffix);
}

}  // namespace

std::vector<Graph> load_tudataset(const fs::path& dir, const std::string& name,
                                  const LoadOptions& options) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const auto a_path = member(dir, name, "_A.txt");
  const auto ind_path = member(dir, name, "_graph_indicator.txt");
  const auto lab_path = member(dir, name, "_graph_labels.txt");
  const auto node_lab_path = member(dir, name, "_node_labels.txt");
  for (const auto& p : {a_path, ind_path, lab_path}) {
    if (!fs::exists(p)) throw DataError("missing dataset file: " + p.string());
  }

  const IntTable indicator = read_table(ind_path, 1);
  const IntTable graph_labels = read_table(lab_path, 1);
  const IntTable adjacency = read_table(a_path, 2);
  const bool has_node_labels = fs::exists(node_lab_path);
  IntTable node_labels;
  if (has_node_labels) node_labels = read_table(node_lab_path, 1);

  const std::size_t total_nodes = indicator.values.size();
  const std::size_t num_graphs = graph_labels.values.size();
  if (num_graphs == 0) throw DataError(lab_path.string() + ": no graphs");
  if (has_node_labels && node_labels.values.size() != total_nodes) {
    throw DataError(node_lab_path.string() + ": " + std::to_string(node_labels.values.size()) +
                    " node labels for " + std::to_string(total_nodes) + " nodes");
  }

  std::vector<std::size_t> graph_of(total_nodes), local_index(total_nodes);
  std::vector<std::size_t> sizes(num_graphs, 0);
  for (std::size_t v = 0; v < total_nodes; ++v) {
    const long long gid = indicator.values[v];
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw DataError(ind_path.string(), indicator.lines[v],
                      "graph id " + std::to_string(gid) + " outside [1, " +
                          std::to_string(num_graphs) + "]");
    }
    graph_of[v] = static_cast<std::size_t>(gid - 1);
    local_index[v] = sizes[graph_of[v]]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (sizes[g] == 0) throw DataError(ind_path.string() + ": graph " + std::to_string(g + 1) + " has no nodes");
  }

  std::vector<std::vector<Edge>> edges(num_graphs);
  for (std::size_t e = 0; e < adjacency.lines.size(); ++e) {
    const long long i = adjacency.values[2 * e], j = adjacency.values[2 * e + 1];
    for (long long idx : {i, j}) {
      if (idx < 1 || static_cast<std::size_t>(idx) > total_nodes) {
        throw DataError(a_path.string(), adjacency.lines[e],
                        "dangling node index " + std::to_string(idx) + " (dataset has " +
                            std::to_string(total_nodes) + " nodes)");
      }
    }
    const auto u = static_cast<std::size_t>(i - 1), v = static_cast<std::size_t>(j - 1);
    if (graph_of[u] != graph_of[v]) {
      throw DataError(a_path.string(), adjacency.lines[e], "edge joins nodes of different graphs");
    }
    edges[graph_of[u]].emplace_back(local_index[u], local_index[v]);
  }

  std::set<long long> distinct_labels(graph_labels.values.begin(), graph_labels.values.end());
  std::map<long long, int> label_index;
  for (long long l : distinct_labels) label_index.emplace(l, static_cast<int>(label_index.size()));

  std::map<long long, std::size_t> node_label_index;
  if (has_node_labels) {
    std::set<long long> distinct(node_labels.values.begin(), node_labels.values.end());
    for (long long l : distinct) node_label_index.emplace(l, node_label_index.size());
  }

  FeatureMode mode = options.features;
  if (mode == FeatureMode::Auto && !has_node_labels) mode = FeatureMode::Degree;

  std::vector<std::vector<std::size_t>> members(num_graphs);
  for (std::size_t v = 0; v < total_nodes; ++v) members[graph_of[v]].push_back(v);

  std::vector<Graph> graphs;
  graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    const std::size_t n = sizes[g];
    Graph graph = Graph::make(n, std::move(edges[g]), Tensor<double>(Shape{n, 1}),
                              label_index.at(graph_labels.values[g]));
    if (has_node_labels) {
      for (std::size_t v : members[g]) graph.node_labels.push_back(static_cast<int>(node_labels.values[v]));
    }
    const auto deg = graph.degrees();
    switch (mode) {
      case FeatureMode::Auto: {
        Tensor<double> f(Shape{n, node_label_index.size()});
        for (std::size_t k = 0; k < n; ++k)
          f.at(k, node_label_index.at(graph.node_labels[k])) = 1.0;
        graph.features = std::move(f);
        break;
      }
      case FeatureMode::Degree: {
        for (std::size_t k = 0; k < n; ++k) graph.features.at(k, 0) = static_cast<double>(deg[k]);
        break;
      }
      case FeatureMode::DegreeOneHot: {
        const std::size_t cap = std::max<std::size_t>(options.degree_cap, 1);
        Tensor<double> f(Shape{n, cap});
        for (std::size_t k = 0; k < n; ++k) f.at(k, std::min(deg[k], cap - 1)) = 1.0;
        graph.features = std::move(f);
        break;
      }
    }
    graphs.push_back(std::move(graph));
  }
  return graphs;
}

void save_tudataset(const fs::path& dir, const std::string& name, std::span<const Graph> graphs) {
  fs::create_directories(dir);
  std::ofstream a(member(dir, name, "_A.txt"));
  std::ofstream ind(member(dir, name, "_graph_indicator.txt"));
  std::ofstream lab(member(dir, name, "_graph_labels.txt"));
  const bool node_labels = !graphs.empty() && std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) {
    return g.node_labels.size() == g.num_nodes;
  });
  std::ofstream nl;
  if (node_labels) nl.open(member(dir, name, "_node_labels.txt"));
  std::size_t base = 1;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Graph& graph = graphs[g];
    for (const auto& [u, v] : graph.edges) {
      a << base + u << ", " << base + v << '\n';
      a << base + v << ", " << base + u << '\n';
    }
    for (std::size_t k = 0; k < graph.num_nodes; ++k) {
      ind << g + 1 << '\n';
      if (node_labels) nl << graph.node_labels[k] << '\n';
    }
    lab << graph.label << '\n';
    base += graph.num_nodes;
  }
  if (!a || !ind || !lab) throw DataError("failed writing dataset to " + dir.string());
}

DatasetStats dataset_stats(std::span<const Graph> graphs) {
  DatasetStats s;
  s.graphs = graphs.size();
  if (graphs.empty()) return s;
  double nodes = 0, edges = 0;
  for (const auto& g : graphs) {
    nodes += static_cast<double>(g.num_nodes);
    edges += static_cast<double>(g.edges.size());
    ++s.class_histogram[g.label];
  }
  s.avg_nodes = nodes / static_cast<double>(graphs.size());
  s.avg_edges = edges / static_cast<double>(graphs.size());
  s.feature_dim = graphs.front().feature_dim();
  return s;
}

int count_classes(std::span<const Graph> graphs) {
  int c = 0;
  for (const auto& g : graphs) c = std::max(c, g.label + 1);
  return c;
}

SplitIndices split_indices(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  if (n == 0) throw DataError("cannot split an empty dataset");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::Split);
  shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2] + 1e-9));
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

DatasetSplit split_dataset(std::span<const Graph> graphs, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  const SplitIndices idx = split_indices(graphs.size(), ratios, seed);
  DatasetSplit out;
  for (auto i : idx.train) out.train.push_back(graphs[i]);
  for (auto i : idx.val) out.val.push_back(graphs[i]);
  for (auto i : idx.test) out.test.push_back(graphs[i]);
  return out;
}

}  // namespace mnagt
