#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mnagt/graph.hpp"
#include "mnagt/rng.hpp"

namespace mnagt {

/// Balanced two-class structural task: class 0 is a triangle, class 1 a path
/// on three nodes. Node features are one-hot degrees (width 3), the same
/// featurization the loader offers for label-free data. Node order is
/// shuffled per graph and the list is returned in seeded random order.
std::vector<Graph> triangles_vs_paths(std::size_t count, std::uint64_t seed);

/// Erdos-Renyi graph G(n, p) with `feature_dim` uniform(-1, 1) features.
Graph random_graph(std::size_t n, double p, std::size_t feature_dim, Rng& rng, int label = 0);

/// Same graph with node i relabelled to perm[i].
Graph permute_nodes(const Graph& g, const std::vector<std::size_t>& perm);

}  // namespace mnagt
