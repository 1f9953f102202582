#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mnagt/graph.hpp"

namespace mnagt {

/// Several graphs packed block-diagonally. Node rows of graph b occupy
/// [offsets[b], offsets[b + 1]); a_hat has no entries outside those blocks,
/// so neither propagation nor attention can mix graphs.
struct GraphBatch {
  Tensor<double> features;
  std::vector<std::size_t> offsets{0};
  SparseMatrix a_hat;
  std::vector<int> labels;

  std::size_t num_graphs() const { return labels.size(); }
  std::size_t num_nodes() const { return offsets.back(); }
};

/// Throws DimensionError on an empty list or a feature-width mismatch.
GraphBatch make_batch(std::span<const Graph* const> graphs, NormalizationKind kind);
GraphBatch make_batch(std::span<const Graph> graphs, NormalizationKind kind);

}  // namespace mnagt
