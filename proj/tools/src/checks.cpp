#include "mnagt/tools/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

#include "mnagt/batch.hpp"
#include "mnagt/model.hpp"
#include "mnagt/oracle/oracle.hpp"
#include "mnagt/synthetic.hpp"

namespace mnagt::checks {

namespace orc = mnagt::oracle;

bool Report::passed() const {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

std::size_t Report::failures() const {
  return static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return !r.passed; }));
}

void Report::append(const Report& other) {
  results.insert(results.end(), other.results.begin(), other.results.end());
}

std::string format_report(const Report& report) {
  std::ostringstream out;
  for (const auto& r : report.results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.suite << ' ' << r.name << std::scientific
        << std::setprecision(3) << " err=" << r.error << " tol=" << r.tolerance;
    if (!r.detail.empty()) out << ' ' << r.detail;
    out << '\n';
  }
  return out.str();
}

namespace {

using Vd = Var<double>;
using Td = Tensor<double>;

CheckResult make_result(std::string suite, std::string name, double error, double tolerance,
                        std::string detail = {}) {
  const bool ok = std::isfinite(error) && error <= tolerance;
  return {std::move(suite), std::move(name), error, tolerance, ok, std::move(detail)};
}

Td random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  Td t(std::move(shape));
  for (auto& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

orc::DenseMatrix dense(const Td& t) {
  return orc::DenseMatrix(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()));
}

std::vector<double> flat(const Td& t) { return {t.values().begin(), t.values().end()}; }

std::string fmt(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << x;
  return s.str();
}

/// Scalar <out, r> recorded as its own node so the probe never routes
/// through the op under test.
Vd probe(Vd out, const Td& r) {
  double acc = 0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += out.value()[i] * r[i];
  return out.tape().record("probe", Td::scalar(acc), {out}, [out, r](Tape<double>& tape, std::size_t self) {
    Td g = r;
    const double s = tape.grad_output(self)[0];
    for (auto& v : g.values()) v *= s;
    tape.accumulate(out, g);
  });
}

using Builder = std::function<Vd(const std::vector<Vd>&)>;

CheckResult check_op(const std::string& op, std::vector<Td> inputs, const Builder& build, Rng& rng,
                     double tolerance) {
  Td r;
  {
    Tape<double> tape;
    std::vector<Vd> c;
    for (const auto& in : inputs) c.push_back(tape.constant(in));
    r = random_tensor(build(c).shape(), rng);
  }
  Tape<double> tape;
  std::vector<Vd> leaves;
  for (auto in : inputs) leaves.push_back(tape.leaf(in.set_requires_grad(true)));
  tape.backward(probe(build(leaves), r));

  double worst_norm = 0, worst_elem = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto analytic = flat(tape.grad(leaves[i]));
    auto f = [&] {
      Tape<double> t;
      std::vector<Vd> c;
      for (const auto& in : inputs) c.push_back(t.constant(in));
      const Td out = build(c).value();
      double acc = 0;
      for (std::size_t j = 0; j < r.size(); ++j) acc += out[j] * r[j];
      return acc;
    };
    const auto numeric = orc::numerical_gradient(f, inputs[i].values());
    worst_norm = std::max(worst_norm, orc::normwise_relative_error(analytic, numeric));
    worst_elem = std::max(worst_elem, orc::max_relative_error(analytic, numeric, 1e-6));
  }
  return make_result("grad.op", op, worst_norm, tolerance, "elementwise=" + fmt(worst_elem));
}

Graph random_connectedish_graph(std::size_t n, std::size_t feature_dim, Rng& rng) {
  const double p = uniform(rng, 0.2, 0.7);
  return random_graph(n, p, feature_dim, rng, static_cast<int>(uniform_index(rng, 2)));
}

std::vector<std::pair<std::size_t, std::size_t>> edge_list(const Graph& g) {
  return {g.edges.begin(), g.edges.end()};
}

ModelConfig small_model(std::size_t input_dim, std::size_t classes, std::size_t dim, std::size_t heads,
                        std::size_t layers, int max_hop) {
  ModelConfig c;
  c.input_dim = input_dim;
  c.num_classes = classes;
  c.num_layers = layers;
  c.mna.dim = dim;
  c.mna.heads = heads;
  c.mna.head_dim = dim / heads;
  c.mna.max_hop = max_hop;
  c.mna.dropout = 0.0;
  c.validate();
  return c;
}

KernelParamsT<Vd> bind_kernel(Tape<double>& tape, const KernelParams<double>& p) {
  return map_params(p, [&tape](const Td& t) { return tape.constant(t); });
}

std::vector<orc::HeadWeights> head_weights(const KernelParams<double>& p) {
  std::vector<orc::HeadWeights> heads;
  for (std::size_t j = 0; j < p.wq.size(); ++j) heads.push_back({dense(p.wq[j]), dense(p.wk[j]), dense(p.wv[j])});
  return heads;
}

}  // namespace

Report model_gradient_check(const GradcheckOptions& o) {
  Rng rng = make_rng(o.seed, Stream::Data);
  ModelConfig config = small_model(o.input_dim, o.classes, o.dim, o.heads, o.layers, o.max_hop);
  config.mna.aggregator = o.aggregator;
  config.validate();
  Rng init = make_rng(o.seed, Stream::Init);
  ModelParams<double> params = init_model_params<double>(config, init);
  // Perturb the zero-initialized biases and unit gains so every gradient path is exercised.
  for_each_param(params, [&rng](const std::string&, Td& t) {
    for (auto& v : t.values()) v += uniform(rng, -0.1, 0.1);
  });
  Graph g = random_graph(o.nodes, 0.5, o.input_dim, rng, static_cast<int>(uniform_index(rng, o.classes)));
  const std::vector<Graph> graphs{g};
  const GraphBatch batch = make_batch(std::span<const Graph>(graphs), config.norm);

  Tape<double> tape;
  const auto vars = bind(tape, params);
  tape.backward(ops::cross_entropy_logits(model_forward(tape, batch, vars, config),
                                          std::span<const int>(batch.labels)));
  std::vector<std::pair<std::string, Td>> analytic;
  for_each_param(vars, [&](const std::string& name, const Vd& v) { analytic.emplace_back(name, tape.grad(v)); });

  auto loss = [&] {
    Tape<double> t;
    const auto c = map_params(params, [&t](const Td& x) { return t.constant(x); });
    return ops::cross_entropy_logits(model_forward(t, batch, c, config), std::span<const int>(batch.labels))
        .value()[0];
  };

  Report report;
  std::size_t index = 0;
  for_each_param(params, [&](const std::string& name, Td& t) {
    const auto numeric = orc::numerical_gradient(loss, t.values(), o.step);
    const auto a = flat(analytic[index++].second);
    const double norm_err = orc::normwise_relative_error(a, numeric);
    const double elem_err = orc::max_relative_error(a, numeric, 1e-6);
    // Gate on the worse of the two so that a single bad entry in a large tensor still fails.
    report.results.push_back(make_result("grad.model", name, std::max(norm_err, elem_err), o.tolerance,
                                         "normwise=" + fmt(norm_err) + " elementwise=" + fmt(elem_err) +
                                             " n=" + std::to_string(t.size())));
  });
  return report;
}

Report op_gradient_checks(std::uint64_t seed, double tol) {
  Rng rng = make_rng(seed, Stream::Data);
  auto rt = [&rng](std::size_t r, std::size_t c) { return random_tensor(Shape{r, c}, rng); };
  Report report;
  auto run = [&](const std::string& op, std::vector<Td> in, const Builder& b) {
    report.results.push_back(check_op(op, std::move(in), b, rng, tol));
  };

  run("matmul", {rt(3, 4), rt(4, 2)}, [](const std::vector<Vd>& v) { return ops::matmul(v[0], v[1]); });
  run("transpose", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::transpose(v[0]); });
  run("add", {rt(3, 4), rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::add(v[0], v[1]); });
  run("add_row", {rt(3, 4), rt(1, 4)}, [](const std::vector<Vd>& v) { return ops::add_row(v[0], v[1]); });
  run("mul", {rt(3, 4), rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::mul(v[0], v[1]); });
  run("scale", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::scale(v[0], 0.7); });
  run("mul_col", {rt(3, 4), rt(3, 1)}, [](const std::vector<Vd>& v) { return ops::mul_col(v[0], v[1]); });
  run("concat_cols", {rt(3, 2), rt(3, 3)},
      [](const std::vector<Vd>& v) { return ops::concat_cols(std::vector<Vd>{v[0], v[1]}); });
  run("slice_cols", {rt(3, 5)}, [](const std::vector<Vd>& v) { return ops::slice_cols(v[0], 1, 3); });
  run("sum", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::sum(v[0]); });
  run("sum_rows", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::sum_rows(v[0]); });
  Td kinked = random_tensor(Shape{3, 4}, rng, 0.1, 1.0);
  for (std::size_t i = 0; i < kinked.size(); i += 2) kinked[i] = -kinked[i];
  run("relu", {kinked}, [](const std::vector<Vd>& v) { return ops::relu(v[0]); });
  run("tanh", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::tanh(v[0]); });
  run("gelu", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::gelu(v[0], ops::GeluForm::Tanh); });
  run("gelu_erf", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::gelu(v[0], ops::GeluForm::Erf); });
  run("softmax_rows", {rt(3, 4)}, [](const std::vector<Vd>& v) { return ops::softmax_rows(v[0]); });
  run("layer_norm", {rt(3, 4), rt(1, 4), rt(1, 4)},
      [](const std::vector<Vd>& v) { return ops::layer_norm(v[0], v[1], v[2], 1e-5); });
  run("dropout", {rt(4, 5)}, [](const std::vector<Vd>& v) {
    Rng r = make_rng(5, Stream::Dropout);
    return ops::dropout(v[0], 0.3, true, r);
  });
  const std::vector<int> labels{2, 0, 3};
  run("cross_entropy", {rt(3, 4)}, [labels](const std::vector<Vd>& v) {
    return ops::cross_entropy_logits(v[0], std::span<const int>(labels));
  });
  const std::vector<std::size_t> offsets{0, 2, 5};
  run("pool_segments", {rt(5, 3)}, [offsets](const std::vector<Vd>& v) {
    return ops::add(ops::pool_segments(v[0], std::span<const std::size_t>(offsets), ops::PoolKind::Mean),
                    ops::pool_segments(v[0], std::span<const std::size_t>(offsets), ops::PoolKind::Sum));
  });

  const Graph g = random_graph(5, 0.5, 1, rng);
  const SparseMatrix a = normalized_adjacency(g, NormalizationKind::Symmetric);
  // Odd hop count: an even number of chained sign flips would cancel.
  run("propagate", {rt(5, 3)}, [&a](const std::vector<Vd>& v) { return propagate(v[0], a, 3); });
  run("attention", {rt(5, 3), rt(5, 3), rt(5, 4)}, [offsets](const std::vector<Vd>& v) {
    return scaled_dot_attention(v[0], v[1], v[2], std::span<const std::size_t>(offsets));
  });
  run("attention_dropout", {rt(5, 3), rt(5, 3), rt(5, 4)}, [offsets](const std::vector<Vd>& v) {
    Rng r = make_rng(9, Stream::Dropout);
    return scaled_dot_attention(v[0], v[1], v[2], std::span<const std::size_t>(offsets), 0.3,
                                ForwardContext{true, &r});
  });
  return report;
}

Report oracle_equivalence(std::size_t trials, std::uint64_t seed, double tol) {
  Rng rng = make_rng(seed, Stream::Data);
  double err_prop = 0, err_kernel = 0, err_attn = 0, err_adaptive = 0, err_alpha_sum = 0, err_adj = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    const int c = static_cast<int>(uniform_index(rng, 4));
    const std::size_t m = 1 + uniform_index(rng, 3);
    const std::size_t dh = 2 + uniform_index(rng, 3);
    const std::size_t d = 4 + uniform_index(rng, 5);
    const Graph g = random_connectedish_graph(n, d, rng);
    const auto kind = uniform_index(rng, 2) ? NormalizationKind::Symmetric : NormalizationKind::RandomWalk;
    const SparseMatrix a = normalized_adjacency(g, kind);
    const orc::DenseMatrix ad = orc::dense_normalized_adjacency(n, edge_list(g), kind == NormalizationKind::Symmetric);
    err_adj = std::max(err_adj, orc::max_abs_diff(a.to_dense(), ad.values));

    MnaConfig cfg;
    cfg.max_hop = c;
    cfg.heads = m;
    cfg.dim = d;
    cfg.head_dim = dh;
    cfg.dropout = 0;
    const KernelPlan plan = cfg.plan();
    Rng init = make_rng(seed + t, Stream::Init);
    const MnaParams<double> params = init_mna_params<double>(cfg, plan, init);
    const std::vector<std::size_t> offsets{0, n};
    const std::span<const std::size_t> off(offsets);

    Tape<double> tape;
    const Vd h = tape.constant(g.features);
    const orc::DenseMatrix hd = dense(g.features);

    const auto prop = propagate(h, a, c);
    err_prop = std::max(err_prop, orc::max_abs_diff(flat(prop.value()), orc::dense_power_propagate(ad, hd, c).values));

    std::vector<Vd> z_list;
    std::vector<orc::DenseMatrix> z_dense;
    for (std::size_t k = 0; k < plan.kernels.size(); ++k) {
      const auto kp = bind_kernel(tape, params.kernels[k]);
      const Vd z = kernel_mha(h, a, off, plan.kernels[k], kp);
      const orc::DenseMatrix zo = orc::naive_kernel_mha(hd, ad, plan.kernels[k].hop, false,
                                                        head_weights(params.kernels[k]), dense(params.kernels[k].wo));
      err_kernel = std::max(err_kernel, orc::max_abs_diff(flat(z.value()), zo.values));
      z_list.push_back(z);
      z_dense.push_back(zo);
    }

    const Td q = random_tensor(Shape{n, dh}, rng), k = random_tensor(Shape{n, dh}, rng),
             v = random_tensor(Shape{n, d}, rng);
    const Vd fast = scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v), off);
    err_attn = std::max(err_attn,
                        orc::max_abs_diff(flat(fast.value()), orc::naive_attention(dense(q), dense(k), dense(v)).values));

    const auto& ap = *params.adaptive;
    const auto agg = adaptive_aggregate(z_list, AdaptiveParamsT<Vd>{tape.constant(ap.proj), tape.constant(ap.score)});
    const auto naive = orc::naive_adaptive_aggregate(z_dense, dense(ap.proj), dense(ap.score));
    err_adaptive = std::max(err_adaptive, orc::max_abs_diff(flat(agg.z.value()), naive.z.values));
    err_adaptive = std::max(err_adaptive, orc::max_abs_diff(flat(agg.alpha.value()), naive.alpha.values));
    const Td& alpha = agg.alpha.value();
    for (std::size_t i = 0; i < alpha.rows(); ++i) {
      double s = 0;
      for (double x : alpha.row(i)) s += x;
      err_alpha_sum = std::max(err_alpha_sum, std::abs(s - 1));
    }
  }
  const std::string over = "over " + std::to_string(trials) + " graphs";
  Report r;
  r.results.push_back(make_result("oracle", "normalized_adjacency", err_adj, 1e-12, over));
  r.results.push_back(make_result("oracle", "propagate", err_prop, tol, over));
  r.results.push_back(make_result("oracle", "kernel_mha", err_kernel, tol, over));
  r.results.push_back(make_result("oracle", "attention", err_attn, 1e-8, over));
  r.results.push_back(make_result("oracle", "adaptive_aggregate", err_adaptive, tol, over));
  r.results.push_back(make_result("oracle", "alpha_row_sum", err_alpha_sum, 1e-6, over));
  return r;
}

Report structural_invariants(std::size_t trials, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Data);
  const std::size_t fdim = 3;
  const ModelConfig config = small_model(fdim, 3, 8, 2, 2, 2);
  Rng init = make_rng(seed, Stream::Init);
  const ModelParams<double> params = init_model_params<double>(config, init);

  auto logits_of = [&](std::span<const Graph> gs) { return predict_logits(make_batch(gs, config.norm), params, config); };

  double sym = 0, rows = 0, perm = 0, batch = 0;
  std::size_t sym_fail = 0, rows_fail = 0, perm_fail = 0, batch_fail = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Graph g = random_connectedish_graph(1 + uniform_index(rng, 12), fdim, rng);

    const SparseMatrix s = normalized_adjacency(g, NormalizationKind::Symmetric);
    double e = 0;
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      for (std::size_t j = 0; j < g.num_nodes; ++j) e = std::max(e, std::abs(s.at(i, j) - s.at(j, i)));
    sym = std::max(sym, e);
    sym_fail += e > 1e-12;

    const SparseMatrix w = normalized_adjacency(g, NormalizationKind::RandomWalk);
    e = 0;
    for (std::size_t i = 0; i < w.rows; ++i) {
      double total = 0;
      for (std::size_t p = w.row_offsets[i]; p < w.row_offsets[i + 1]; ++p) total += w.values[p];
      e = std::max(e, std::abs(total - 1));
    }
    rows = std::max(rows, e);
    rows_fail += e > 1e-9;

    std::vector<std::size_t> order(g.num_nodes);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order.begin(), order.end(), rng);
    const std::vector<Graph> one{g}, permuted{permute_nodes(g, order)};
    e = orc::max_abs_diff(flat(logits_of(one)), flat(logits_of(permuted)));
    perm = std::max(perm, e);
    perm_fail += e > 1e-5;

    const std::size_t count = 2 + uniform_index(rng, 4);
    std::vector<Graph> group;
    for (std::size_t b = 0; b < count; ++b) group.push_back(random_connectedish_graph(1 + uniform_index(rng, 10), fdim, rng));
    const Td together = logits_of(group);
    e = 0;
    for (std::size_t b = 0; b < count; ++b) {
      const Td alone = logits_of(std::span<const Graph>(&group[b], 1));
      for (std::size_t c = 0; c < alone.cols(); ++c) e = std::max(e, std::abs(alone.at(0, c) - together.at(b, c)));
    }
    batch = std::max(batch, e);
    batch_fail += e > 1e-6;
  }
  auto detail = [trials](std::size_t fails) {
    return std::to_string(trials - fails) + "/" + std::to_string(trials) + " trials";
  };
  Report r;
  r.results.push_back(make_result("invariant", "symmetric_adjacency", sym, 1e-12, detail(sym_fail)));
  r.results.push_back(make_result("invariant", "random_walk_row_sums", rows, 1e-9, detail(rows_fail)));
  r.results.push_back(make_result("invariant", "permutation_invariance", perm, 1e-5, detail(perm_fail)));
  r.results.push_back(make_result("invariant", "batch_singleton_agreement", batch, 1e-6, detail(batch_fail)));
  return r;
}

Report special_case_reductions(std::size_t trials, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Data);
  double vanilla = 0, sat = 0, graphtrans_first = 0, graphtrans_later = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 8), d = 8, m = 1 + uniform_index(rng, 3);
    const Graph g = random_connectedish_graph(n, d, rng);
    const SparseMatrix a = normalized_adjacency(g, NormalizationKind::Symmetric);
    const std::vector<std::size_t> offsets{0, n};
    const std::span<const std::size_t> off(offsets);
    Rng init = make_rng(seed + t, Stream::Init);

    // c = 0 against plain multi-head attention with the same weights.
    MnaConfig cfg;
    cfg.max_hop = 0;
    cfg.heads = m;
    cfg.dim = d;
    cfg.head_dim = 4;
    cfg.dropout = 0;
    const MnaParams<double> p0 = init_mna_params<double>(cfg, cfg.plan(), init);
    {
      Tape<double> tape;
      const Vd h = tape.constant(g.features);
      const auto vars = map_params(p0, [&tape](const Td& x) { return tape.constant(x); });
      const Td mna = mna_forward(h, a, off, cfg.plan(), vars, cfg).z.value();
      const Td mha = vanilla_mha(h, off, vars.kernels[0]).value();
      vanilla = std::max(vanilla, orc::max_abs_diff(flat(mna), flat(mha)));
    }

    // SAT-like single kernel against the adaptive model restricted to hop b.
    const int b = static_cast<int>(1 + uniform_index(rng, 3));
    ModelConfig restricted = small_model(d, 2, 8, m, 2, b);
    restricted.mna.hops = {b};
    restricted.mna.head_dim = 4;
    restricted.validate();
    ModelConfig sat_cfg = restricted;
    sat_cfg.layer_plans = special_case_kernels(SpecialCase::SATLike, b, restricted.num_layers);
    sat_cfg.validate();
    const ModelParams<double> pr = init_model_params<double>(restricted, init);
    ModelParams<double> ps = pr;
    for (auto& layer : ps.layers) layer.mna.adaptive.reset();
    const std::vector<Graph> one{g};
    const GraphBatch gb = make_batch(std::span<const Graph>(one), restricted.norm);
    sat = std::max(sat, orc::max_abs_diff(flat(predict_logits(gb, pr, restricted)), flat(predict_logits(gb, ps, sat_cfg))));

    // GraphTrans-like: first layer reads A^a on all three sources, later layers are vanilla.
    const int hop_a = static_cast<int>(uniform_index(rng, 4));
    const auto plans = special_case_kernels(SpecialCase::GraphTransLike, hop_a, 2);
    const MnaParams<double> pg = init_mna_params<double>(cfg, plans[0], init);
    {
      Tape<double> tape;
      const Vd h = tape.constant(g.features);
      const auto kp = bind_kernel(tape, pg.kernels[0]);
      const Td first = kernel_mha(h, a, off, plans[0].kernels[0], kp).value();
      const orc::DenseMatrix ad = orc::dense_normalized_adjacency(n, edge_list(g), true);
      const auto ref = orc::naive_kernel_mha(dense(g.features), ad, hop_a, true, head_weights(pg.kernels[0]),
                                             dense(pg.kernels[0].wo));
      graphtrans_first = std::max(graphtrans_first, orc::max_abs_diff(flat(first), ref.values));
      const Td later = kernel_mha(h, a, off, plans[1].kernels[0], kp).value();
      const Td plain = vanilla_mha(h, off, kp).value();
      graphtrans_later = std::max(graphtrans_later, orc::max_abs_diff(flat(later), flat(plain)));
    }
  }
  const std::string over = "over " + std::to_string(trials) + " graphs";
  Report r;
  r.results.push_back(make_result("special", "c0_equals_vanilla_mha", vanilla, 0.0, over));
  r.results.push_back(make_result("special", "sat_like_equals_restricted", sat, 0.0, over));
  r.results.push_back(make_result("special", "graphtrans_like_first_layer", graphtrans_first, 1e-9, over));
  r.results.push_back(make_result("special", "graphtrans_like_later_layers", graphtrans_later, 0.0, over));
  return r;
}

}  // namespace mnagt::checks
