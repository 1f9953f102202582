#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mnagt/tape.hpp"
#include "mnagt/tensor.hpp"

namespace mnagt {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unweighted graph with node features and a class label.
struct Graph {
  std::size_t num_nodes = 0;
  /// Canonical (min, max) pairs, sorted, no duplicates, no self-loops.
  std::vector<Edge> edges;
  /// num_nodes x d.
  Tensor<double> features;
  int label = 0;
  /// Raw per-node labels from the source file, when present.
  std::vector<int> node_labels;

  /// Validates endpoints and canonicalizes the edge list.
  static Graph make(std::size_t num_nodes, std::vector<Edge> edges,
                    Tensor<double> features, int label);

  std::size_t feature_dim() const { return features.cols(); }
  std::vector<std::size_t> degrees() const;
};

/// Compressed sparse row matrix; the storage for the normalized adjacency.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  /// Entry (i, j), zero when not stored.
  double at(std::size_t i, std::size_t j) const;
  /// Row-major dense copy (rows * cols values).
  std::vector<double> to_dense() const;
  /// Throws DimensionError when the CSR invariants do not hold.
  void validate() const;
};

enum class NormalizationKind { Symmetric, RandomWalk };

/// Normalized adjacency with self-loops:
/// Symmetric:  D^{-1/2} (A + I) D^{-1/2}
/// RandomWalk: D^{-1} (A + I)
/// where D is the degree matrix of A + I.
SparseMatrix normalized_adjacency(const Graph& g, NormalizationKind kind);

/// Stacks square blocks along the diagonal.
SparseMatrix block_diagonal(std::span<const SparseMatrix> blocks);

/// Plain sparse-dense product a * h for row-major h with `cols` columns.
template <class T>
void spmm(const SparseMatrix& a, const T* h, std::size_t cols, T* out);

/// a_hat^k * h by k successive sparse products, recorded on h's tape.
/// a_hat is treated as a constant and must outlive the tape's backward pass.
template <class T>
Var<T> propagate(Var<T> h, const SparseMatrix& a_hat, int k);

}  // namespace mnagt
