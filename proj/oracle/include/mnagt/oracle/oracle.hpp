#pragma once

// Brute-force reference implementations for tests and the verify command.
// Deliberately self-contained: plain loops over double, no code shared with
// the core library.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mnagt::oracle {

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0);
  DenseMatrix(std::size_t r, std::size_t c, std::vector<double> v);

  static DenseMatrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hstack(const std::vector<DenseMatrix>& parts);

/// Dense normalized adjacency of an undirected graph with self-loops added.
/// `edges` are 0-based pairs, either orientation; duplicates and self-loops
/// in the list are ignored.
DenseMatrix dense_normalized_adjacency(std::size_t n,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                       bool symmetric);

/// a^k h by k literal dense products.
DenseMatrix dense_power_propagate(const DenseMatrix& a, const DenseMatrix& h, int k);

/// Row-wise softmax weights of q k^T / sqrt(d) by explicit pair loops.
DenseMatrix naive_attention_weights(const DenseMatrix& q, const DenseMatrix& k);

/// softmax(q k^T / sqrt(d)) v, one node pair at a time.
DenseMatrix naive_attention(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v);

struct HeadWeights {
  DenseMatrix wq, wk, wv;
};

/// One kernel's multi-head output: heads on (a^hop h wq, a^hop h wk, s wv)
/// with s = a^hop h when propagate_value else h; concatenated, times wo.
DenseMatrix naive_kernel_mha(const DenseMatrix& h, const DenseMatrix& a, int hop, bool propagate_value,
                             const std::vector<HeadWeights>& heads, const DenseMatrix& wo);

enum class Activation { Tanh, Identity, Relu };

struct AdaptiveResult {
  DenseMatrix z;
  DenseMatrix alpha;
};

/// score_k(i) = act(z_k[i] proj) . w;  alpha = softmax over k;  z = sum alpha z_k.
AdaptiveResult naive_adaptive_aggregate(const std::vector<DenseMatrix>& z_list, const DenseMatrix& proj,
                                        const DenseMatrix& w, Activation act = Activation::Tanh);

/// Central differences (f(t + h) - f(t - h)) / 2h for every entry of theta.
/// f must read theta (by reference) and be deterministic. Throws
/// std::domain_error when f returns a non-finite value.
std::vector<double> numerical_gradient(const std::function<double()>& f, std::span<double> theta,
                                       double step = 1e-5);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-9);

/// Largest elementwise relative_error.
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-9);

/// ||a - b|| / max(||a||, ||b||, floor) in the Euclidean norm.
double normwise_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-9);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace mnagt::oracle
