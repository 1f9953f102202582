#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mnagt/rng.hpp"
#include "mnagt/tape.hpp"

namespace mnagt::ops {

enum class GeluForm { Tanh, Erf };

template <class T> Var<T> matmul(Var<T> a, Var<T> b);
template <class T> Var<T> transpose(Var<T> x);

template <class T> Var<T> add(Var<T> a, Var<T> b);
/// x[n x d] + bias[1 x d] broadcast over rows.
template <class T> Var<T> add_row(Var<T> x, Var<T> bias);
/// Elementwise (Hadamard) product.
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scale(Var<T> x, T factor);
/// x[n x d] with row i multiplied by s[i]; s is n x 1.
template <class T> Var<T> mul_col(Var<T> x, Var<T> s);

template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count);

/// Sum of all entries, as a scalar.
template <class T> Var<T> sum(Var<T> x);
/// Column-wise reductions over rows: n x d -> 1 x d.
template <class T> Var<T> sum_rows(Var<T> x);
template <class T> Var<T> mean_rows(Var<T> x);

template <class T> Var<T> relu(Var<T> x);
template <class T> Var<T> tanh(Var<T> x);
template <class T> Var<T> gelu(Var<T> x, GeluForm form = GeluForm::Tanh);

/// Row-wise softmax with per-row max subtraction. Throws NumericError on a
/// non-finite input.
template <class T> Var<T> softmax_rows(Var<T> x);

/// Per-row normalization to zero mean and unit (population) variance,
/// followed by the affine gamma/beta transform.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

/// Inverted dropout. Identity when !training or p == 0; throws ConfigError
/// for p outside [0, 1).
template <class T>
Var<T> dropout(Var<T> x, double p, bool training, Rng& rng);

/// Mean negative log-softmax of the true class over the batch.
template <class T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const int> labels);

enum class PoolKind { Mean, Sum };

/// Reduces each row block [offsets[b], offsets[b+1]) of x to one row.
template <class T>
Var<T> pool_segments(Var<T> x, std::span<const std::size_t> offsets, PoolKind kind);

// Scalar helpers shared with the forward passes.
double gelu_value(double x, GeluForm form);
double gelu_derivative(double x, GeluForm form);

}  // namespace mnagt::ops
