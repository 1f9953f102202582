#include "mnagt/batch.hpp"

#include <algorithm>
#include <string>

namespace mnagt {

GraphBatch make_batch(std::span<const Graph* const> graphs, NormalizationKind kind) {
  if (graphs.empty()) throw DimensionError("make_batch: no graphs");
  const std::size_t d = graphs.front()->feature_dim();
  std::size_t total = 0;
  for (const Graph* g : graphs) {
    if (g->feature_dim() != d) {
      throw DimensionError("make_batch: feature width " + std::to_string(g->feature_dim()) +
                           " differs from " + std::to_string(d));
    }
    total += g->num_nodes;
  }
  GraphBatch batch;
  batch.features = Tensor<double>(Shape{total, d});
  std::vector<SparseMatrix> blocks;
  blocks.reserve(graphs.size());
  std::size_t row = 0;
  for (const Graph* g : graphs) {
    std::copy_n(g->features.data(), g->num_nodes * d, batch.features.data() + row * d);
    row += g->num_nodes;
    batch.offsets.push_back(row);
    batch.labels.push_back(g->label);
    blocks.push_back(normalized_adjacency(*g, kind));
  }
  batch.a_hat = block_diagonal(blocks);
  return batch;
}

GraphBatch make_batch(std::span<const Graph> graphs, NormalizationKind kind) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return make_batch(std::span<const Graph* const>(ptrs), kind);
}

}  // namespace mnagt
