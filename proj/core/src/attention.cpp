#include "mnagt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "eigen_view.hpp"

namespace mnagt {

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Adaptive: return "adaptive";
    case Aggregator::Sum: return "sum";
    case Aggregator::Average: return "average";
    case Aggregator::Concatenate: return "concat";
    case Aggregator::Single: return "single";
  }
  return "?";
}

Aggregator parse_aggregator(const std::string& s) {
  if (s == "adaptive") return Aggregator::Adaptive;
  if (s == "sum") return Aggregator::Sum;
  if (s == "average" || s == "mean") return Aggregator::Average;
  if (s == "concat" || s == "concatenate") return Aggregator::Concatenate;
  if (s == "single") return Aggregator::Single;
  throw ConfigError("unknown aggregator '" + s + "' (adaptive|sum|average|concat)");
}

std::string to_string(ScoreActivation a) {
  switch (a) {
    case ScoreActivation::Tanh: return "tanh";
    case ScoreActivation::Identity: return "identity";
    case ScoreActivation::Relu: return "relu";
  }
  return "?";
}

ScoreActivation parse_score_activation(const std::string& s) {
  if (s == "tanh") return ScoreActivation::Tanh;
  if (s == "identity") return ScoreActivation::Identity;
  if (s == "relu") return ScoreActivation::Relu;
  throw ConfigError("unknown score activation '" + s + "' (tanh|identity|relu)");
}

KernelPlan MnaConfig::plan() const {
  KernelPlan plan;
  plan.aggregator = aggregator;
  if (hops.empty()) {
    for (int k = 0; k <= max_hop; ++k) plan.kernels.push_back({k, false});
  } else {
    for (int k : hops) plan.kernels.push_back({k, false});
  }
  return plan;
}

void MnaConfig::validate() const {
  if (max_hop < 0) throw ConfigError("c (max hop) must be >= 0");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (head_dim < 1) throw ConfigError("head_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  for (int k : hops)
    if (k < 0) throw ConfigError("hops must be >= 0");
  if (aggregator == Aggregator::Single && plan().kernels.size() != 1) {
    throw ConfigError("the single aggregator needs exactly one kernel");
  }
}

std::vector<KernelPlan> special_case_kernels(SpecialCase kind, int hop, std::size_t num_layers) {
  if (hop < 0) throw ConfigError("special-case hop must be >= 0");
  if (num_layers < 1) throw ConfigError("need at least one layer");
  std::vector<KernelPlan> plans;
  for (std::size_t l = 0; l < num_layers; ++l) {
    KernelPlan p;
    p.aggregator = Aggregator::Single;
    if (kind == SpecialCase::SATLike) {
      p.kernels = {{hop, false}};
    } else {
      p.kernels = {l == 0 ? KernelSpec{hop, true} : KernelSpec{0, false}};
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

template <class T>
Tensor<T> xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor<T> w(Shape{rows, cols});
  for (auto& x : w.values()) x = static_cast<T>(uniform(rng, -limit, limit));
  w.set_requires_grad(true);
  return w;
}

template <class T>
MnaParams<T> init_mna_params(const MnaConfig& config, const KernelPlan& plan, Rng& rng) {
  const std::size_t d = config.dim, dh = config.head_dim, m = config.heads;
  MnaParams<T> p;
  for (std::size_t k = 0; k < plan.kernels.size(); ++k) {
    KernelParams<T> kp;
    for (std::size_t j = 0; j < m; ++j) {
      kp.wq.push_back(xavier_uniform<T>(d, dh, rng));
      kp.wk.push_back(xavier_uniform<T>(d, dh, rng));
      kp.wv.push_back(xavier_uniform<T>(d, dh, rng));
    }
    kp.wo = xavier_uniform<T>(m * dh, d, rng);
    p.kernels.push_back(std::move(kp));
  }
  if (plan.aggregator == Aggregator::Adaptive) {
    p.adaptive = AdaptiveParams<T>{xavier_uniform<T>(d, d, rng), xavier_uniform<T>(1, d, rng)};
  }
  if (plan.aggregator == Aggregator::Concatenate) {
    p.concat_proj = xavier_uniform<T>(plan.kernels.size() * d, d, rng);
  }
  return p;
}

namespace {

void check_offsets(std::span<const std::size_t> offsets, std::size_t n) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != n) {
    throw DimensionError("attention: block offsets do not cover " + std::to_string(n) + " rows");
  }
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    if (offsets[b + 1] < offsets[b]) throw DimensionError("attention: block offsets not monotone");
  }
}

// Row-wise in-place softmax of an n x n block.
template <class Block>
void softmax_block(Block&& s) {
  using T = typename std::decay_t<Block>::Scalar;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const T mx = row.maxCoeff();
    if (!std::isfinite(mx)) throw NumericError("attention: non-finite logits");
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

template <class T>
Var<T> multi_head(Var<T> q_src, Var<T> k_src, Var<T> v_src, std::span<const std::size_t> offsets,
                  const KernelParamsT<Var<T>>& params, double dropout, const ForwardContext& ctx) {
  const std::size_t m = params.wq.size();
  if (m == 0 || params.wk.size() != m || params.wv.size() != m) {
    throw DimensionError("multi-head attention: inconsistent head parameter counts");
  }
  // Per-head projections are d x d_h, far too narrow for an efficient GEMM.
  // Concatenate the weights and project once, then slice the heads back out.
  const std::size_t dh = params.wq.front().cols();
  const std::size_t dv = params.wv.front().cols();
  std::vector<Var<T>> wqk(params.wq.begin(), params.wq.end());
  Var<T> qk, kk;
  if (q_src.id() == k_src.id()) {
    wqk.insert(wqk.end(), params.wk.begin(), params.wk.end());
    qk = ops::matmul(q_src, ops::concat_cols(wqk));
    kk = qk;
  } else {
    qk = ops::matmul(q_src, ops::concat_cols(wqk));
    kk = ops::matmul(k_src, ops::concat_cols(params.wk));
  }
  const std::size_t k_base = q_src.id() == k_src.id() ? m * dh : 0;
  const Var<T> vv = ops::matmul(v_src, ops::concat_cols(params.wv));
  std::vector<Var<T>> heads;
  heads.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto q = ops::slice_cols(qk, j * dh, dh);
    auto k = ops::slice_cols(kk, k_base + j * dh, dh);
    auto v = ops::slice_cols(vv, j * dv, dv);
    heads.push_back(scaled_dot_attention(q, k, v, offsets, dropout, ctx));
  }
  return ops::matmul(ops::concat_cols(heads), params.wo);
}

}  // namespace

template <class T>
Var<T> scaled_dot_attention(Var<T> q, Var<T> k, Var<T> v, std::span<const std::size_t> offsets,
                            double dropout, const ForwardContext& ctx) {
  if (q.shape() != k.shape()) {
    throw DimensionError("attention: query " + shape_to_string(q.shape()) + " and key " +
                         shape_to_string(k.shape()) + " differ");
  }
  const std::size_t n = q.rows(), dh = q.cols(), dv = v.cols();
  if (v.rows() != n) {
    throw DimensionError("attention: value " + shape_to_string(v.shape()) + " vs query " +
                         shape_to_string(q.shape()));
  }
  check_offsets(offsets, n);
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("attention dropout must lie in [0, 1)");
  const bool drop = ctx.training && dropout > 0.0;
  if (drop && ctx.rng == nullptr) throw ConfigError("attention dropout needs an RNG");

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto blocks = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
  std::vector<std::size_t> start(blocks->size(), 0);
  for (std::size_t b = 0; b + 1 < blocks->size(); ++b) {
    const std::size_t nb = (*blocks)[b + 1] - (*blocks)[b];
    start[b + 1] = start[b] + nb * nb;
  }
  auto starts = std::make_shared<std::vector<std::size_t>>(std::move(start));
  auto probs = std::make_shared<std::vector<T>>(starts->back());
  std::shared_ptr<std::vector<T>> mask;
  if (drop) mask = std::make_shared<std::vector<T>>(starts->back());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout));

  Tensor<T> out(Shape{n, dv});
  const T* qd = q.value().data();
  const T* kd = k.value().data();
  const T* vd = v.value().data();
  for (std::size_t b = 0; b + 1 < blocks->size(); ++b) {
    const std::size_t lo = (*blocks)[b], nb = (*blocks)[b + 1] - lo;
    if (nb == 0) continue;
    auto p = out_view(probs->data() + (*starts)[b], nb, nb);
    p.noalias() = in_view(qd + lo * dh, nb, dh) * in_view(kd + lo * dh, nb, dh).transpose();
    p *= scale;
    softmax_block(p);
    auto o = out_view(out.data() + lo * dv, nb, dv);
    if (drop) {
      auto mk = out_view(mask->data() + (*starts)[b], nb, nb);
      for (Eigen::Index i = 0; i < mk.size(); ++i)
        mk.data()[i] = uniform01(*ctx.rng) < dropout ? T(0) : keep_scale;
      o.noalias() = p.cwiseProduct(mk) * in_view(vd + lo * dv, nb, dv);
    } else {
      o.noalias() = p * in_view(vd + lo * dv, nb, dv);
    }
  }

  return q.tape().record(
      "attention", std::move(out), {q, k, v},
      [q, k, v, blocks, starts, probs, mask, scale, dh, dv](Tape<T>& tape, std::size_t self) {
        const T* g = tape.grad_output(self).data();
        const T* qd = q.value().data();
        const T* kd = k.value().data();
        const T* vd = v.value().data();
        Tensor<T> dq(q.shape()), dk(k.shape()), dvt(v.shape());
        RowMatrix<T> dw, ds;
        for (std::size_t b = 0; b + 1 < blocks->size(); ++b) {
          const std::size_t lo = (*blocks)[b], nb = (*blocks)[b + 1] - lo;
          if (nb == 0) continue;
          auto p = in_view(probs->data() + (*starts)[b], nb, nb);
          auto gb = in_view(g + lo * dv, nb, dv);
          auto vb = in_view(vd + lo * dv, nb, dv);
          if (mask) {
            auto mk = in_view(mask->data() + (*starts)[b], nb, nb);
            out_view(dvt.data() + lo * dv, nb, dv).noalias() = p.cwiseProduct(mk).transpose() * gb;
            dw.noalias() = gb * vb.transpose();
            dw = dw.cwiseProduct(mk);
          } else {
            out_view(dvt.data() + lo * dv, nb, dv).noalias() = p.transpose() * gb;
            dw.noalias() = gb * vb.transpose();
          }
          // Softmax Jacobian: ds = p * (dw - rowsum(dw * p)).
          ds = dw;
          for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            const T dot = dw.row(i).dot(p.row(i));
            ds.row(i) = p.row(i).cwiseProduct((dw.row(i).array() - dot).matrix());
          }
          ds *= scale;
          out_view(dq.data() + lo * dh, nb, dh).noalias() = ds * in_view(kd + lo * dh, nb, dh);
          out_view(dk.data() + lo * dh, nb, dh).noalias() = ds.transpose() * in_view(qd + lo * dh, nb, dh);
        }
        tape.accumulate(q, dq);
        tape.accumulate(k, dk);
        tape.accumulate(v, dvt);
      });
}

template <class T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k,
                            std::span<const std::size_t> offsets) {
  if (q.shape() != k.shape()) throw DimensionError("attention_weights: query/key shapes differ");
  const std::size_t n = q.rows(), dh = q.cols();
  check_offsets(offsets, n);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Tensor<T> w(Shape{n, n});
  RowMatrix<T> p;
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    const std::size_t lo = offsets[b], nb = offsets[b + 1] - lo;
    if (nb == 0) continue;
    p.noalias() = in_view(q.data() + lo * dh, nb, dh) * in_view(k.data() + lo * dh, nb, dh).transpose();
    p *= scale;
    softmax_block(p);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = 0; j < nb; ++j)
        w.at(lo + i, lo + j) = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return w;
}

template <class T>
Var<T> vanilla_mha(Var<T> h, std::span<const std::size_t> offsets,
                   const KernelParamsT<Var<T>>& params, double dropout, const ForwardContext& ctx) {
  return multi_head(h, h, h, offsets, params, dropout, ctx);
}

template <class T>
Var<T> kernel_mha(Var<T> h, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                  const KernelSpec& spec, const KernelParamsT<Var<T>>& params, double dropout,
                  const ForwardContext& ctx) {
  if (spec.hop < 0) throw ConfigError("kernel hop must be >= 0");
  Var<T> p = propagate(h, a_hat, spec.hop);
  return multi_head(p, p, spec.propagate_value ? p : h, offsets, params, dropout, ctx);
}

template <class T>
std::vector<Var<T>> make_kernel_outputs(Var<T> h, const SparseMatrix& a_hat,
                                        std::span<const std::size_t> offsets, const KernelPlan& plan,
                                        const std::vector<KernelParamsT<Var<T>>>& params,
                                        double dropout, const ForwardContext& ctx) {
  if (params.size() != plan.kernels.size()) {
    throw ConfigError("make_kernel_outputs: " + std::to_string(params.size()) +
                      " parameter sets for " + std::to_string(plan.kernels.size()) + " kernels");
  }
  int max_hop = 0;
  for (const auto& spec : plan.kernels) {
    if (spec.hop < 0) throw ConfigError("kernel hop must be >= 0");
    max_hop = std::max(max_hop, spec.hop);
  }
  std::vector<Var<T>> powers{h};
  for (int k = 1; k <= max_hop; ++k) powers.push_back(propagate(powers.back(), a_hat, 1));
  std::vector<Var<T>> outputs;
  outputs.reserve(plan.kernels.size());
  for (std::size_t i = 0; i < plan.kernels.size(); ++i) {
    const auto& spec = plan.kernels[i];
    const Var<T> p = powers[static_cast<std::size_t>(spec.hop)];
    outputs.push_back(multi_head(p, p, spec.propagate_value ? p : h, offsets, params[i], dropout, ctx));
  }
  return outputs;
}

template <class T>
AdaptiveOutput<T> adaptive_aggregate(const std::vector<Var<T>>& z_list,
                                     const AdaptiveParamsT<Var<T>>& params,
                                     ScoreActivation activation) {
  if (z_list.empty()) throw DimensionError("adaptive_aggregate: no kernel outputs");
  for (const auto& z : z_list) {
    if (z.shape() != z_list.front().shape()) {
      throw DimensionError("adaptive_aggregate: kernel outputs " +
                           shape_to_string(z_list.front().shape()) + " and " +
                           shape_to_string(z.shape()) + " differ");
    }
  }
  const Var<T> score_t = ops::transpose(params.score);
  std::vector<Var<T>> scores;
  scores.reserve(z_list.size());
  for (const auto& z : z_list) {
    Var<T> hidden = ops::matmul(z, params.proj);
    switch (activation) {
      case ScoreActivation::Tanh: hidden = ops::tanh(hidden); break;
      case ScoreActivation::Relu: hidden = ops::relu(hidden); break;
      case ScoreActivation::Identity: break;
    }
    scores.push_back(ops::matmul(hidden, score_t));
  }
  const Var<T> alpha = ops::softmax_rows(ops::concat_cols(scores));
  Var<T> z = ops::mul_col(z_list[0], ops::slice_cols(alpha, 0, 1));
  for (std::size_t k = 1; k < z_list.size(); ++k)
    z = ops::add(z, ops::mul_col(z_list[k], ops::slice_cols(alpha, k, 1)));
  return {z, alpha};
}

template <class T>
Var<T> aggregate_variant(const std::vector<Var<T>>& z_list, Aggregator variant,
                         const std::optional<Var<T>>& concat_proj) {
  if (z_list.empty()) throw DimensionError("aggregate_variant: no kernel outputs");
  switch (variant) {
    case Aggregator::Single:
      if (z_list.size() != 1) throw ConfigError("single aggregator expects one kernel output");
      return z_list.front();
    case Aggregator::Sum:
    case Aggregator::Average: {
      Var<T> z = z_list.front();
      for (std::size_t k = 1; k < z_list.size(); ++k) z = ops::add(z, z_list[k]);
      if (variant == Aggregator::Average && z_list.size() > 1)
        z = ops::scale(z, T(1) / static_cast<T>(z_list.size()));
      return z;
    }
    case Aggregator::Concatenate: {
      if (!concat_proj) throw ConfigError("concatenate aggregator needs a projection");
      return ops::matmul(ops::concat_cols(z_list), *concat_proj);
    }
    case Aggregator::Adaptive:
      break;
  }
  throw ConfigError("aggregate_variant: use adaptive_aggregate for the adaptive aggregator");
}

template <class T>
MnaOutput<T> mna_forward(Var<T> h, const SparseMatrix& a_hat, std::span<const std::size_t> offsets,
                         const KernelPlan& plan, const MnaParamsT<Var<T>>& params,
                         const MnaConfig& config, const ForwardContext& ctx) {
  const auto z_list = make_kernel_outputs(h, a_hat, offsets, plan, params.kernels, config.dropout, ctx);
  MnaOutput<T> out;
  if (plan.aggregator == Aggregator::Adaptive) {
    if (!params.adaptive) throw ConfigError("adaptive aggregator without adaptive parameters");
    auto agg = adaptive_aggregate(z_list, *params.adaptive, config.score_activation);
    out.z = agg.z;
    out.alpha = agg.alpha;
  } else {
    out.z = aggregate_variant(z_list, plan.aggregator, params.concat_proj);
  }
  if (ctx.training && config.dropout > 0.0) {
    if (ctx.rng == nullptr) throw ConfigError("dropout needs an RNG");
    out.z = ops::dropout(out.z, config.dropout, true, *ctx.rng);
  }
  return out;
}

#define MNAGT_INSTANTIATE_ATTENTION(T)                                                          \
  template Tensor<T> xavier_uniform<T>(std::size_t, std::size_t, Rng&);                          \
  template MnaParams<T> init_mna_params<T>(const MnaConfig&, const KernelPlan&, Rng&);           \
  template Var<T> scaled_dot_attention(Var<T>, Var<T>, Var<T>, std::span<const std::size_t>,     \
                                       double, const ForwardContext&);                           \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&,                       \
                                       std::span<const std::size_t>);                            \
  template Var<T> vanilla_mha(Var<T>, std::span<const std::size_t>, const KernelParamsT<Var<T>>&, \
                              double, const ForwardContext&);                                    \
  template Var<T> kernel_mha(Var<T>, const SparseMatrix&, std::span<const std::size_t>,          \
                             const KernelSpec&, const KernelParamsT<Var<T>>&, double,            \
                             const ForwardContext&);                                             \
  template std::vector<Var<T>> make_kernel_outputs(                                              \
      Var<T>, const SparseMatrix&, std::span<const std::size_t>, const KernelPlan&,              \
      const std::vector<KernelParamsT<Var<T>>>&, double, const ForwardContext&);                 \
  template AdaptiveOutput<T> adaptive_aggregate(const std::vector<Var<T>>&,                      \
                                                const AdaptiveParamsT<Var<T>>&, ScoreActivation); \
  template Var<T> aggregate_variant(const std::vector<Var<T>>&, Aggregator,                      \
                                    const std::optional<Var<T>>&);                               \
  template MnaOutput<T> mna_forward(Var<T>, const SparseMatrix&, std::span<const std::size_t>,   \
                                    const KernelPlan&, const MnaParamsT<Var<T>>&,                \
                                    const MnaConfig&, const ForwardContext&);

MNAGT_INSTANTIATE_ATTENTION(float)
MNAGT_INSTANTIATE_ATTENTION(double)

#undef MNAGT_INSTANTIATE_ATTENTION

}  // namespace mnagt
