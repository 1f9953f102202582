#include "mnagt/synthetic.hpp"

#include <numeric>

namespace mnagt {

std::vector<Graph> triangles_vs_paths(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Data);
  std::vector<Graph> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<Edge> edges{{0, 1}, {1, 2}};
    if (label == 0) edges.push_back({0, 2});
    std::vector<std::size_t> perm{0, 1, 2};
    shuffle(perm.begin(), perm.end(), rng);
    Graph g = Graph::make(3, edges, Tensor<double>(3, 3), label);
    const auto deg = g.degrees();
    for (std::size_t v = 0; v < 3; ++v) g.features.at(v, deg[v]) = 1.0;
    out.push_back(permute_nodes(g, perm));
  }
  shuffle(out.begin(), out.end(), rng);
  return out;
}

Graph random_graph(std::size_t n, double p, std::size_t feature_dim, Rng& rng, int label) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < p) edges.emplace_back(i, j);
  Tensor<double> x(n, feature_dim);
  for (auto& v : x.values()) v = uniform(rng, -1, 1);
  return Graph::make(n, std::move(edges), std::move(x), label);
}

Graph permute_nodes(const Graph& g, const std::vector<std::size_t>& perm) {
  if (perm.size() != g.num_nodes) throw DimensionError("permute_nodes: permutation size mismatch");
  std::vector<Edge> edges;
  for (const auto& [a, b] : g.edges) edges.emplace_back(perm[a], perm[b]);
  Tensor<double> x(g.num_nodes, g.feature_dim());
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t c = 0; c < g.feature_dim(); ++c) x.at(perm[i], c) = g.features.at(i, c);
  Graph out = Graph::make(g.num_nodes, std::move(edges), std::move(x), g.label);
  if (!g.node_labels.empty()) {
    out.node_labels.resize(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) out.node_labels[perm[i]] = g.node_labels[i];
  }
  return out;
}

}  // namespace mnagt
