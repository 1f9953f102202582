#include "mnagt/model.hpp"

#include <cstdint>
#include <cstring>

namespace mnagt {

std::string to_string(ops::PoolKind p) { return p == ops::PoolKind::Mean ? "mean" : "sum"; }

ops::PoolKind parse_pool_kind(const std::string& s) {
  if (s == "mean") return ops::PoolKind::Mean;
  if (s == "sum") return ops::PoolKind::Sum;
  throw ConfigError("unknown pooling '" + s + "' (mean|sum)");
}

std::string to_string(NormalizationKind k) {
  return k == NormalizationKind::Symmetric ? "sym" : "rw";
}

NormalizationKind parse_normalization(const std::string& s) {
  if (s == "sym" || s == "symmetric") return NormalizationKind::Symmetric;
  if (s == "rw" || s == "random-walk" || s == "randomwalk") return NormalizationKind::RandomWalk;
  throw ConfigError("unknown normalization '" + s + "' (sym|rw)");
}

KernelPlan ModelConfig::plan_for(std::size_t layer) const {
  if (layer_plans.empty()) return mna.plan();
  return layer_plans.at(layer);
}

void ModelConfig::validate() const {
  mna.validate();
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (num_layers < 1) throw ConfigError("layers must be >= 1");
  if (!(ln_eps > 0)) throw ConfigError("ln_eps must be > 0");
  if (!layer_plans.empty() && layer_plans.size() != num_layers) {
    throw ConfigError("layer_plans must list one plan per layer");
  }
  for (const auto& p : layer_plans) {
    if (p.kernels.empty()) throw ConfigError("a layer plan needs at least one kernel");
    if (p.aggregator == Aggregator::Single && p.kernels.size() != 1) {
      throw ConfigError("the single aggregator needs exactly one kernel");
    }
  }
}

namespace {

template <class T>
Tensor<T> filled(std::size_t n, T value) {
  Tensor<T> t(Shape{n}, value);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

template <class T>
LayerParams<T> init_layer_params(const ModelConfig& config, const KernelPlan& plan, Rng& rng) {
  const std::size_t d = config.dim(), f = config.effective_ffn_dim();
  LayerParams<T> p;
  p.ln1 = {filled<T>(d, 1), filled<T>(d, 0)};
  p.mna = init_mna_params<T>(config.mna, plan, rng);
  p.ln2 = {filled<T>(d, 1), filled<T>(d, 0)};
  p.ffn = {xavier_uniform<T>(d, f, rng), filled<T>(f, 0), xavier_uniform<T>(f, d, rng), filled<T>(d, 0)};
  return p;
}

template <class T>
ModelParams<T> init_model_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.dim();
  ModelParams<T> p;
  p.input = xavier_uniform<T>(config.input_dim, d, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l)
    p.layers.push_back(init_layer_params<T>(config, config.plan_for(l), rng));
  p.head = {xavier_uniform<T>(d, d, rng), filled<T>(d, 0), xavier_uniform<T>(d, config.num_classes, rng),
            filled<T>(config.num_classes, 0)};
  return p;
}

template <class T>
Var<T> layer_forward(Var<T> x, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                     const LayerParamsT<Var<T>>& params, const KernelPlan& plan,
                     const ModelConfig& config, const ForwardContext& ctx) {
  const T eps = static_cast<T>(config.ln_eps);
  const Var<T> normed = ops::layer_norm(x, params.ln1.gamma, params.ln1.beta, eps);
  const MnaOutput<T> mna = mna_forward(normed, a_hat, offsets, plan, params.mna, config.mna, ctx);
  const Var<T> mid = ops::add(mna.z, propagate(x, a_hat, 1));
  const Var<T> h = ops::layer_norm(mid, params.ln2.gamma, params.ln2.beta, eps);
  Var<T> ffn = ops::add_row(ops::matmul(h, params.ffn.w1), params.ffn.b1);
  ffn = ops::gelu(ffn, config.gelu);
  ffn = ops::add_row(ops::matmul(ffn, params.ffn.w2), params.ffn.b2);
  return ops::add(ffn, mid);
}

template <class T>
Var<T> model_forward(Tape<T>& tape, const GraphBatch& batch, const ModelParamsT<Var<T>>& params,
                     const ModelConfig& config, const ForwardContext& ctx) {
  if (batch.features.cols() != config.input_dim) {
    throw DimensionError("model_forward: batch features " + shape_to_string(batch.features.shape()) +
                         " but input_dim is " + std::to_string(config.input_dim));
  }
  if (params.layers.size() != config.num_layers) {
    throw DimensionError("model_forward: parameters hold " + std::to_string(params.layers.size()) +
                         " layers, config expects " + std::to_string(config.num_layers));
  }
  const std::span<const std::size_t> offsets(batch.offsets);
  Var<T> h = ops::matmul(tape.constant(batch.features.template cast<T>()), params.input);
  for (std::size_t l = 0; l < config.num_layers; ++l)
    h = layer_forward(h, batch.a_hat, offsets, params.layers[l], config.plan_for(l), config, ctx);
  const Var<T> pooled = ops::pool_segments(h, offsets, config.pooling);
  Var<T> z = ops::add_row(ops::matmul(pooled, params.head.w1), params.head.b1);
  z = ops::gelu(z, config.gelu);
  return ops::add_row(ops::matmul(z, params.head.w2), params.head.b2);
}

template <class T>
Tensor<T> predict_logits(const GraphBatch& batch, const ModelParams<T>& params, const ModelConfig& config) {
  Tape<T> tape;
  const auto vars = map_params(params, [&tape](const Tensor<T>& t) { return tape.constant(t); });
  Tensor<T> out = model_forward(tape, batch, vars, config).value();
  return out;
}

template <class T>
std::uint64_t parameter_checksum(const ModelParams<T>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_param(params, [&h](const std::string&, const Tensor<T>& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

#define MNAGT_INSTANTIATE_MODEL(T)                                                               \
  template LayerParams<T> init_layer_params<T>(const ModelConfig&, const KernelPlan&, Rng&);     \
  template ModelParams<T> init_model_params<T>(const ModelConfig&, Rng&);                        \
  template Var<T> layer_forward(Var<T>, const SparseMatrix&, std::span<const std::size_t>,       \
                                const LayerParamsT<Var<T>>&, const KernelPlan&,                  \
                                const ModelConfig&, const ForwardContext&);                      \
  template Var<T> model_forward(Tape<T>&, const GraphBatch&, const ModelParamsT<Var<T>>&,        \
                                const ModelConfig&, const ForwardContext&);                      \
  template Tensor<T> predict_logits(const GraphBatch&, const ModelParams<T>&, const ModelConfig&); \
  template std::uint64_t parameter_checksum(const ModelParams<T>&);

MNAGT_INSTANTIATE_MODEL(float)
MNAGT_INSTANTIATE_MODEL(double)

#undef MNAGT_INSTANTIATE_MODEL

}  // namespace mnagt
