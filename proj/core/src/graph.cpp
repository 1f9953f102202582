#include "mnagt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mnagt {

Graph Graph::make(std::size_t num_nodes, std::vector<Edge> edges,
                  Tensor<double> features, int label) {
  for (auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw DimensionError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                           ") outside a graph with " + std::to_string(num_nodes) + " nodes");
    }
    if (u > v) std::swap(u, v);
  }
  // Self-loops are implied by the normalization (A + I).
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (features.rows() != num_nodes && !(num_nodes == 0 && features.size() == 0)) {
    throw DimensionError("feature matrix " + shape_to_string(features.shape()) +
                         " for a graph with " + std::to_string(num_nodes) + " nodes");
  }
  Graph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(edges);
  g.features = std::move(features);
  g.label = label;
  return g;
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(num_nodes, 0);
  for (const auto& [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
  const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_indices.begin())];
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> dense(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
      dense[i * cols + col_indices[p]] = values[p];
  return dense;
}

void SparseMatrix::validate() const {
  if (row_offsets.size() != rows + 1) throw DimensionError("row_offsets must have rows + 1 entries");
  if (row_offsets.back() != values.size() || col_indices.size() != values.size()) {
    throw DimensionError("row_offsets/col_indices/values lengths disagree");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) throw DimensionError("row_offsets not monotone");
    for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
      if (col_indices[p] >= cols) throw DimensionError("column index out of range");
      if (p > row_offsets[i] && col_indices[p] <= col_indices[p - 1]) {
        throw DimensionError("column indices not strictly increasing in row " + std::to_string(i));
      }
    }
  }
}

SparseMatrix normalized_adjacency(const Graph& g, NormalizationKind kind) {
  const std::size_t n = g.num_nodes;
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) nbrs[i].push_back(i);
  for (const auto& [u, v] : g.edges) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    deg[i] = static_cast<double>(nbrs[i].size());
  }
  SparseMatrix a;
  a.rows = a.cols = n;
  a.row_offsets.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbrs[i]) {
      a.col_indices.push_back(j);
      a.values.push_back(kind == NormalizationKind::Symmetric
                             ? 1.0 / std::sqrt(deg[i] * deg[j])
                             : 1.0 / deg[i]);
    }
    a.row_offsets.push_back(a.col_indices.size());
  }
  return a;
}

SparseMatrix block_diagonal(std::span<const SparseMatrix> blocks) {
  SparseMatrix out;
  out.row_offsets.assign(1, 0);
  std::size_t base = 0;
  for (const auto& b : blocks) {
    if (b.rows != b.cols) throw DimensionError("block_diagonal: blocks must be square");
    for (std::size_t i = 0; i < b.rows; ++i) {
      for (std::size_t p = b.row_offsets[i]; p < b.row_offsets[i + 1]; ++p) {
        out.col_indices.push_back(base + b.col_indices[p]);
        out.values.push_back(b.values[p]);
      }
      out.row_offsets.push_back(out.col_indices.size());
    }
    base += b.rows;
  }
  out.rows = out.cols = base;
  return out;
}

template <class T>
void spmm(const SparseMatrix& a, const T* h, std::size_t cols, T* out) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    T* dst = out + i * cols;
    std::fill(dst, dst + cols, T(0));
    for (std::size_t p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
      const T w = static_cast<T>(a.values[p]);
      const T* src = h + a.col_indices[p] * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += w * src[j];
    }
  }
}

namespace {

// dst += a^T * g (scatter form; a need not be symmetric).
template <class T>
void spmm_transpose_add(const SparseMatrix& a, const T* g, std::size_t cols, T* dst) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* src = g + i * cols;
    for (std::size_t p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
      const T w = static_cast<T>(a.values[p]);
      T* out = dst + a.col_indices[p] * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += w * src[j];
    }
  }
}

template <class T>
Var<T> spmm_op(Var<T> h, const SparseMatrix& a) {
  const auto [n, d] = matrix_dims(h.shape());
  if (a.rows != a.cols || a.cols != n) {
    throw DimensionError("propagate: adjacency " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " does not match features " +
                         shape_to_string(h.shape()));
  }
  Tensor<T> out(Shape{n, d});
  spmm(a, h.value().data(), d, out.data());
  const SparseMatrix* ap = &a;
  return h.tape().record("propagate", std::move(out), {h}, [h, ap, d](Tape<T>& tape, std::size_t self) {
    Tensor<T> dh(h.shape());
    spmm_transpose_add(*ap, tape.grad_output(self).data(), d, dh.data());
    tape.accumulate(h, dh);
  });
}

}  // namespace

template <class T>
Var<T> propagate(Var<T> h, const SparseMatrix& a_hat, int k) {
  if (k < 0) throw DimensionError("propagate: hop count must be >= 0");
  if (a_hat.rows != h.rows()) {
    throw DimensionError("propagate: adjacency of size " + std::to_string(a_hat.rows) +
                         " does not match features " + shape_to_string(h.shape()));
  }
  for (int i = 0; i < k; ++i) h = spmm_op(h, a_hat);
  return h;
}

template void spmm<float>(const SparseMatrix&, const float*, std::size_t, float*);
template void spmm<double>(const SparseMatrix&, const double*, std::size_t, double*);
template Var<float> propagate(Var<float>, const SparseMatrix&, int);
template Var<double> propagate(Var<double>, const SparseMatrix&, int);

}  // namespace mnagt
