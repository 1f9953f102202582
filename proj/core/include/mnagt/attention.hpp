#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mnagt/graph.hpp"
#include "mnagt/ops.hpp"
#include "mnagt/rng.hpp"
#include "mnagt/tape.hpp"

namespace mnagt {

/// How kernel outputs Z^0..Z^c are combined per node.
enum class Aggregator {
  Adaptive,
  Sum,
  Average,
  Concatenate,
  /// Pass-through for single-kernel plans (the special-case reductions).
  Single,
};

/// The sigma applied before the scoring vector in adaptive aggregation.
enum class ScoreActivation { Tanh, Identity, Relu };

std::string to_string(Aggregator a);
Aggregator parse_aggregator(const std::string& s);
std::string to_string(ScoreActivation a);
ScoreActivation parse_score_activation(const std::string& s);

/// One attention kernel: queries and keys read A_hat^hop H; values read H,
/// or A_hat^hop H when propagate_value is set.
struct KernelSpec {
  int hop = 0;
  bool propagate_value = false;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Kernels and aggregation used by one layer.
struct KernelPlan {
  std::vector<KernelSpec> kernels;
  Aggregator aggregator = Aggregator::Adaptive;

  friend bool operator==(const KernelPlan&, const KernelPlan&) = default;
};

struct MnaConfig {
  /// c: kernels use hops 0..c unless `hops` is set.
  int max_hop = 3;
  /// m: heads per kernel.
  std::size_t heads = 3;
  /// d: model width (also the value width).
  std::size_t dim = 128;
  /// d_h: per-head query/key/value width.
  std::size_t head_dim = 8;
  Aggregator aggregator = Aggregator::Adaptive;
  ScoreActivation score_activation = ScoreActivation::Tanh;
  /// Applied to attention weights and to the aggregated output.
  double dropout = 0.2;
  /// Explicit hop set, overriding 0..max_hop.
  std::vector<int> hops;

  KernelPlan plan() const;
  void validate() const;
};

enum class SpecialCase {
  /// (A^a X, A^a X, A^a X) in the first layer, (X, X, X) after.
  GraphTransLike,
  /// (A^b X, A^b X, X) in every layer.
  SATLike,
};

std::vector<KernelPlan> special_case_kernels(SpecialCase kind, int hop, std::size_t num_layers);

// ---------------------------------------------------------------------------
// Parameters. Templated on the leaf type so the same structure holds Tensors
// (storage) or Vars (bound to a tape for one forward pass).

template <class P>
struct KernelParamsT {
  std::vector<P> wq, wk, wv;  // per head: d x d_h
  P wo;                       // (m * d_h) x d
};

template <class P>
struct AdaptiveParamsT {
  P proj;   // W: d x d
  P score;  // w: 1 x d
};

template <class P>
struct MnaParamsT {
  std::vector<KernelParamsT<P>> kernels;
  std::optional<AdaptiveParamsT<P>> adaptive;
  std::optional<P> concat_proj;  // ((c+1) d) x d
};

template <class T> using KernelParams = KernelParamsT<Tensor<T>>;
template <class T> using AdaptiveParams = AdaptiveParamsT<Tensor<T>>;
template <class T> using MnaParams = MnaParamsT<Tensor<T>>;

template <class P, class F>
void for_each_param(KernelParamsT<P>& p, const std::string& prefix, F&& f) {
  for (std::size_t j = 0; j < p.wq.size(); ++j) {
    const std::string h = prefix + "head." + std::to_string(j) + ".";
    f(h + "wq", p.wq[j]);
    f(h + "wk", p.wk[j]);
    f(h + "wv", p.wv[j]);
  }
  f(prefix + "wo", p.wo);
}

template <class P, class F>
void for_each_param(MnaParamsT<P>& p, const std::string& prefix, F&& f) {
  for (std::size_t k = 0; k < p.kernels.size(); ++k)
    for_each_param(p.kernels[k], prefix + "kernel." + std::to_string(k) + ".", f);
  if (p.adaptive) {
    f(prefix + "adaptive.proj", p.adaptive->proj);
    f(prefix + "adaptive.score", p.adaptive->score);
  }
  if (p.concat_proj) f(prefix + "concat.proj", *p.concat_proj);
}

template <class P, class F>
auto map_params(const KernelParamsT<P>& p, F&& f) {
  using Q = decltype(f(p.wo));
  KernelParamsT<Q> out;
  for (const auto& w : p.wq) out.wq.push_back(f(w));
  for (const auto& w : p.wk) out.wk.push_back(f(w));
  for (const auto& w : p.wv) out.wv.push_back(f(w));
  out.wo = f(p.wo);
  return out;
}

template <class P, class F>
auto map_params(const MnaParamsT<P>& p, F&& f) {
  using Q = decltype(f(std::declval<const P&>()));
  MnaParamsT<Q> out;
  for (const auto& k : p.kernels) out.kernels.push_back(map_params(k, f));
  if (p.adaptive) out.adaptive = AdaptiveParamsT<Q>{f(p.adaptive->proj), f(p.adaptive->score)};
  if (p.concat_proj) out.concat_proj = f(*p.concat_proj);
  return out;
}

/// Xavier-uniform weights for `plan`.
template <class T>
MnaParams<T> init_mna_params(const MnaConfig& config, const KernelPlan& plan, Rng& rng);

/// Xavier-uniform rows x cols matrix, marked as requiring grad.
template <class T>
Tensor<T> xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// ---------------------------------------------------------------------------
// Forward operations.

struct ForwardContext {
  bool training = false;
  /// Dropout stream; required when training with dropout > 0.
  Rng* rng = nullptr;
};

/// softmax(q k^T / sqrt(d_h)) v restricted to the diagonal blocks given by
/// `offsets`; cross-block pairs are excluded from the softmax support.
/// Attention-weight dropout with rate `dropout` when ctx.training.
template <class T>
Var<T> scaled_dot_attention(Var<T> q, Var<T> k, Var<T> v, std::span<const std::size_t> offsets,
                            double dropout = 0.0, const ForwardContext& ctx = {});

/// Dense N x N post-softmax attention weights (zero off the blocks), for
/// inspection and tests.
template <class T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k,
                            std::span<const std::size_t> offsets);

/// Standard multi-head attention on the kernel (H, H, H).
template <class T>
Var<T> vanilla_mha(Var<T> h, std::span<const std::size_t> offsets,
                   const KernelParamsT<Var<T>>& params, double dropout = 0.0,
                   const ForwardContext& ctx = {});

/// Output Z^k of one kernel: heads on (A^k h W_Q^j, A^k h W_K^j, h W_V^j),
/// concatenated and projected by W_O.
template <class T>
Var<T> kernel_mha(Var<T> h, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                  const KernelSpec& spec, const KernelParamsT<Var<T>>& params,
                  double dropout = 0.0, const ForwardContext& ctx = {});

/// Z^k for every kernel of the plan. A^k h is built incrementally: one sparse
/// product per hop, shared by all kernels.
template <class T>
std::vector<Var<T>> make_kernel_outputs(Var<T> h, const SparseMatrix& a_hat,
                                        std::span<const std::size_t> offsets,
                                        const KernelPlan& plan,
                                        const std::vector<KernelParamsT<Var<T>>>& params,
                                        double dropout = 0.0, const ForwardContext& ctx = {});

template <class T>
struct AdaptiveOutput {
  Var<T> z;      // n x d
  Var<T> alpha;  // n x (c+1), rows on the simplex
};

/// Per-node softmax over kernels of sigma(z^k W) w^T, then z = sum_k alpha_k z^k.
template <class T>
AdaptiveOutput<T> adaptive_aggregate(const std::vector<Var<T>>& z_list,
                                     const AdaptiveParamsT<Var<T>>& params,
                                     ScoreActivation activation = ScoreActivation::Tanh);

/// Sum, Average, Concatenate (followed by `concat_proj`) or Single.
template <class T>
Var<T> aggregate_variant(const std::vector<Var<T>>& z_list, Aggregator variant,
                         const std::optional<Var<T>>& concat_proj = std::nullopt);

template <class T>
struct MnaOutput {
  Var<T> z;
  std::optional<Var<T>> alpha;
};

/// Kernels, aggregation, then dropout on the aggregated output.
template <class T>
MnaOutput<T> mna_forward(Var<T> h, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                         const KernelPlan& plan, const MnaParamsT<Var<T>>& params,
                         const MnaConfig& config, const ForwardContext& ctx = {});

}  // namespace mnagt
