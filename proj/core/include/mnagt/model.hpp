#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mnagt/attention.hpp"
#include "mnagt/batch.hpp"
#include "mnagt/ops.hpp"

namespace mnagt {

std::string to_string(ops::PoolKind p);
ops::PoolKind parse_pool_kind(const std::string& s);
std::string to_string(NormalizationKind k);
NormalizationKind parse_normalization(const std::string& s);

struct ModelConfig {
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t num_layers = 4;
  /// FFN hidden width; 0 means 2 * dim.
  std::size_t ffn_dim = 0;
  MnaConfig mna;
  ops::PoolKind pooling = ops::PoolKind::Mean;
  NormalizationKind norm = NormalizationKind::Symmetric;
  ops::GeluForm gelu = ops::GeluForm::Tanh;
  double ln_eps = 1e-5;
  /// Per-layer kernel plans (special-case reductions); empty means
  /// mna.plan() in every layer.
  std::vector<KernelPlan> layer_plans;

  std::size_t dim() const { return mna.dim; }
  std::size_t effective_ffn_dim() const { return ffn_dim ? ffn_dim : 2 * mna.dim; }
  KernelPlan plan_for(std::size_t layer) const;
  void validate() const;
};

template <class P>
struct LayerNormParamsT {
  P gamma, beta;
};

template <class P>
struct FfnParamsT {
  P w1, b1, w2, b2;
};

template <class P>
struct LayerParamsT {
  LayerNormParamsT<P> ln1, ln2;
  MnaParamsT<P> mna;
  FfnParamsT<P> ffn;
};

/// d -> d -> C classifier on the pooled representation.
template <class P>
struct HeadParamsT {
  P w1, b1, w2, b2;
};

template <class P>
struct ModelParamsT {
  P input;  // d_in x d
  std::vector<LayerParamsT<P>> layers;
  HeadParamsT<P> head;
};

template <class T> using LayerParams = LayerParamsT<Tensor<T>>;
template <class T> using ModelParams = ModelParamsT<Tensor<T>>;

template <class P, class F>
void for_each_param(LayerParamsT<P>& p, const std::string& prefix, F&& f) {
  f(prefix + "ln1.gamma", p.ln1.gamma);
  f(prefix + "ln1.beta", p.ln1.beta);
  for_each_param(p.mna, prefix + "mna.", f);
  f(prefix + "ln2.gamma", p.ln2.gamma);
  f(prefix + "ln2.beta", p.ln2.beta);
  f(prefix + "ffn.w1", p.ffn.w1);
  f(prefix + "ffn.b1", p.ffn.b1);
  f(prefix + "ffn.w2", p.ffn.w2);
  f(prefix + "ffn.b2", p.ffn.b2);
}

/// Visits every learnable tensor with a stable dotted name, in a fixed order.
template <class P, class F>
void for_each_param(ModelParamsT<P>& p, F&& f) {
  f(std::string("input.weight"), p.input);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    for_each_param(p.layers[l], "layers." + std::to_string(l) + ".", f);
  f(std::string("head.w1"), p.head.w1);
  f(std::string("head.b1"), p.head.b1);
  f(std::string("head.w2"), p.head.w2);
  f(std::string("head.b2"), p.head.b2);
}

template <class P, class F>
void for_each_param(const ModelParamsT<P>& p, F&& f) {
  for_each_param(const_cast<ModelParamsT<P>&>(p),
                 [&f](const std::string& name, const P& value) { f(name, value); });
}

template <class P, class F>
auto map_params(const LayerParamsT<P>& p, F&& f) {
  using Q = decltype(f(p.ln1.gamma));
  LayerParamsT<Q> out;
  out.ln1 = {f(p.ln1.gamma), f(p.ln1.beta)};
  out.mna = map_params(p.mna, f);
  out.ln2 = {f(p.ln2.gamma), f(p.ln2.beta)};
  out.ffn = {f(p.ffn.w1), f(p.ffn.b1), f(p.ffn.w2), f(p.ffn.b2)};
  return out;
}

template <class P, class F>
auto map_params(const ModelParamsT<P>& p, F&& f) {
  using Q = decltype(f(p.input));
  ModelParamsT<Q> out;
  out.input = f(p.input);
  for (const auto& layer : p.layers) out.layers.push_back(map_params(layer, f));
  out.head = {f(p.head.w1), f(p.head.b1), f(p.head.w2), f(p.head.b2)};
  return out;
}

/// Records every tensor as a leaf on `tape` (grad-enabled when the tensor is).
template <class T, class Params>
auto bind(Tape<T>& tape, const Params& params) {
  return map_params(params, [&tape](const Tensor<T>& t) { return tape.leaf(t); });
}

template <class T>
ModelParams<T> init_model_params(const ModelConfig& config, Rng& rng);

template <class T>
LayerParams<T> init_layer_params(const ModelConfig& config, const KernelPlan& plan, Rng& rng);

/// Z' = MNA(LN(x)) + A_hat x;  out = FFN(LN(Z')) + Z'.
template <class T>
Var<T> layer_forward(Var<T> x, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                     const LayerParamsT<Var<T>>& params, const KernelPlan& plan,
                     const ModelConfig& config, const ForwardContext& ctx = {});

/// Input projection, L layers, per-graph pooling and the MLP head: B x C logits.
/// The batch must outlive the tape's backward pass.
template <class T>
Var<T> model_forward(Tape<T>& tape, const GraphBatch& batch, const ModelParamsT<Var<T>>& params,
                     const ModelConfig& config, const ForwardContext& ctx = {});

/// Eval-mode logits without keeping a tape around.
template <class T>
Tensor<T> predict_logits(const GraphBatch& batch, const ModelParams<T>& params,
                         const ModelConfig& config);

/// Exact number of learnable scalars.
template <class P>
std::size_t parameter_count(const ModelParamsT<P>& params) {
  std::size_t n = 0;
  for_each_param(params, [&n](const std::string&, const P& t) { n += t.size(); });
  return n;
}

template <class T>
std::size_t parameter_count(std::span<const Tensor<T>> tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

/// Order-sensitive FNV-1a hash over all parameter bytes.
template <class T>
std::uint64_t parameter_checksum(const ModelParams<T>& params);

}  // namespace mnagt
