#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mnagt/attention.hpp"
#include "mnagt/batch.hpp"
#include "mnagt/model.hpp"
#include "mnagt/oracle/oracle.hpp"
#include "mnagt/synthetic.hpp"

using namespace mnagt;
using Td = Tensor<double>;
using Vd = Var<double>;

namespace {

Td random_tensor(Shape shape, Rng& rng) {
  Td t(std::move(shape));
  for (auto& v : t.values()) v = uniform(rng, -1, 1);
  return t;
}

oracle::DenseMatrix dense(const Td& t) {
  return {t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end())};
}

MnaConfig small_config(int c, std::size_t heads = 2, std::size_t dim = 8) {
  MnaConfig cfg;
  cfg.max_hop = c;
  cfg.heads = heads;
  cfg.dim = dim;
  cfg.head_dim = 4;
  cfg.dropout = 0.0;
  return cfg;
}

struct Fixture {
  Graph graph;
  SparseMatrix a_hat;
  std::vector<std::size_t> offsets;
};

Fixture random_fixture(std::size_t n, std::size_t dim, Rng& rng) {
  Fixture f{random_graph(n, 0.4, dim, rng), {}, {0, n}};
  f.a_hat = normalized_adjacency(f.graph, NormalizationKind::Symmetric);
  return f;
}

AdaptiveParamsT<Vd> bind_adaptive(Tape<double>& tape, const AdaptiveParams<double>& p) {
  return {tape.leaf(p.proj), tape.leaf(p.score)};
}

}  // namespace

TEST(Attention, SingleNodeReturnsValue) {
  Tape<double> tape;
  const std::vector<std::size_t> offsets{0, 1};
  const auto v = tape.constant(Td::matrix({{3, -2}}));
  const auto out = scaled_dot_attention(tape.constant(Td::matrix({{1, 2}})), tape.constant(Td::matrix({{4, 1}})), v,
                                        std::span<const std::size_t>(offsets));
  EXPECT_EQ(out.value(), v.value());
}

TEST(Attention, ZeroLogitsAverageTheBlock) {
  Rng rng = make_rng(1, Stream::Data);
  Tape<double> tape;
  const std::vector<std::size_t> offsets{0, 3, 5};
  const Td v = random_tensor(Shape{5, 2}, rng);
  const auto out = scaled_dot_attention(tape.constant(Td(Shape{5, 4})), tape.constant(random_tensor(Shape{5, 4}, rng)),
                                        tape.constant(v), std::span<const std::size_t>(offsets))
                       .value();
  for (std::size_t c = 0; c < 2; ++c) {
    const double first = (v.at(0, c) + v.at(1, c) + v.at(2, c)) / 3;
    const double second = (v.at(3, c) + v.at(4, c)) / 2;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.at(i, c), first, 1e-15);
    for (std::size_t i = 3; i < 5; ++i) EXPECT_NEAR(out.at(i, c), second, 1e-15);
  }
}

TEST(Attention, WeightsAreRowStochasticWithinBlocks) {
  Rng rng = make_rng(2, Stream::Data);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> offsets{0};
    const std::size_t graphs = 1 + uniform_index(rng, 4);
    for (std::size_t g = 0; g < graphs; ++g) offsets.push_back(offsets.back() + 1 + uniform_index(rng, 6));
    const std::size_t n = offsets.back();
    Td q = random_tensor(Shape{n, 4}, rng), k = random_tensor(Shape{n, 4}, rng);
    for (auto& x : q.values()) x *= 10;
    const Td w = attention_weights(q, k, std::span<const std::size_t>(offsets));
    for (std::size_t g = 0; g < graphs; ++g)
      for (std::size_t i = offsets[g]; i < offsets[g + 1]; ++i) {
        double in_block = 0, out_block = 0;
        for (std::size_t j = 0; j < n; ++j) {
          ASSERT_GE(w.at(i, j), 0.0);
          (j >= offsets[g] && j < offsets[g + 1] ? in_block : out_block) += w.at(i, j);
        }
        ASSERT_NEAR(in_block, 1.0, 1e-9);
        ASSERT_EQ(out_block, 0.0);
      }
  }
}

TEST(Attention, MatchesPairLoopOracle) {
  Rng rng = make_rng(3, Stream::Data);
  const std::vector<std::size_t> offsets{0, 7};
  const Td q = random_tensor(Shape{7, 4}, rng), k = random_tensor(Shape{7, 4}, rng), v = random_tensor(Shape{7, 3}, rng);
  Tape<double> tape;
  const Td out = scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v),
                                      std::span<const std::size_t>(offsets))
                     .value();
  EXPECT_LT(oracle::max_abs_diff(out.values(), oracle::naive_attention(dense(q), dense(k), dense(v)).values), 1e-12);
}

TEST(KernelMha, HopZeroIsVanilla) {
  Rng rng = make_rng(4, Stream::Init);
  const auto f = random_fixture(6, 8, rng);
  const MnaConfig cfg = small_config(0);
  const auto params = init_mna_params<double>(cfg, cfg.plan(), rng);
  Tape<double> tape;
  const auto bound = bind(tape, params.kernels[0]);
  const auto h = tape.constant(f.graph.features);
  const std::span<const std::size_t> offs(f.offsets);
  // Copy before recording more: value() refers into tape storage.
  const Td kernel = kernel_mha(h, f.a_hat, offs, KernelSpec{0, false}, bound).value();
  EXPECT_EQ(kernel, vanilla_mha(h, offs, bound).value());
}

TEST(KernelMha, SingleHeadIdentityOutputIsPlainAttention) {
  Rng rng = make_rng(5, Stream::Init);
  const auto f = random_fixture(5, 4, rng);
  KernelParams<double> p;
  p.wq = {random_tensor(Shape{4, 4}, rng)};
  p.wk = {random_tensor(Shape{4, 4}, rng)};
  p.wv = {random_tensor(Shape{4, 4}, rng)};
  p.wo = Td::matrix({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  Tape<double> tape;
  const auto bound = bind(tape, p);
  const auto h = tape.constant(f.graph.features);
  const std::span<const std::size_t> offs(f.offsets);
  const Td z = kernel_mha(h, f.a_hat, offs, KernelSpec{1, false}, bound).value();
  const auto ah = propagate(h, f.a_hat, 1);
  const Td ref = scaled_dot_attention(ops::matmul(ah, bound.wq[0]), ops::matmul(ah, bound.wk[0]),
                                      ops::matmul(h, bound.wv[0]), offs)
                     .value();
  EXPECT_LT(oracle::max_abs_diff(z.values(), ref.values()), 1e-12);
}

TEST(KernelMha, MatchesOracleAcrossHops) {
  Rng rng = make_rng(6, Stream::Init);
  const auto f = random_fixture(7, 8, rng);
  const MnaConfig cfg = small_config(3, 3);
  const KernelPlan plan = cfg.plan();
  const auto params = init_mna_params<double>(cfg, plan, rng);
  const auto a = oracle::dense_normalized_adjacency(7, f.graph.edges, true);
  for (std::size_t k = 0; k < plan.kernels.size(); ++k) {
    for (bool prop_v : {false, true}) {
      Tape<double> tape;
      const auto bound = bind(tape, params.kernels[k]);
      const Td z = kernel_mha(tape.constant(f.graph.features), f.a_hat, std::span<const std::size_t>(f.offsets),
                              KernelSpec{static_cast<int>(k), prop_v}, bound)
                       .value();
      std::vector<oracle::HeadWeights> heads;
      for (std::size_t j = 0; j < cfg.heads; ++j)
        heads.push_back({dense(params.kernels[k].wq[j]), dense(params.kernels[k].wk[j]), dense(params.kernels[k].wv[j])});
      const auto ref = oracle::naive_kernel_mha(dense(f.graph.features), a, static_cast<int>(k), prop_v, heads,
                                                dense(params.kernels[k].wo));
      EXPECT_LT(oracle::max_abs_diff(z.values(), ref.values), 1e-10) << "hop " << k;
    }
  }
}

TEST(KernelOutputs, CountAndIncrementalPropagation) {
  Rng rng = make_rng(7, Stream::Init);
  const auto f = random_fixture(6, 8, rng);
  for (int c : {0, 3}) {
    const MnaConfig cfg = small_config(c);
    const KernelPlan plan = cfg.plan();
    const auto params = init_mna_params<double>(cfg, plan, rng);
    Tape<double> tape;
    const auto bound = bind(tape, params);
    const auto h = tape.constant(f.graph.features);
    const std::span<const std::size_t> offs(f.offsets);
    const auto outs = make_kernel_outputs(h, f.a_hat, offs, plan, bound.kernels);
    ASSERT_EQ(outs.size(), static_cast<std::size_t>(c + 1));
    for (std::size_t k = 0; k < outs.size(); ++k) {
      const Td independent = kernel_mha(h, f.a_hat, offs, plan.kernels[k], bound.kernels[k]).value();
      EXPECT_LT(oracle::max_abs_diff(outs[k].value().values(), independent.values()), 1e-9);
    }
  }
}

TEST(Adaptive, SingleKernelIsExactPassThrough) {
  Rng rng = make_rng(8, Stream::Init);
  Tape<double> tape;
  const auto z0 = tape.constant(random_tensor(Shape{5, 8}, rng));
  const AdaptiveParams<double> p{random_tensor(Shape{8, 8}, rng), random_tensor(Shape{1, 8}, rng)};
  const auto out = adaptive_aggregate(std::vector<Vd>{z0}, bind_adaptive(tape, p));
  for (double a : out.alpha.value().values()) EXPECT_EQ(a, 1.0);
  EXPECT_EQ(out.z.value(), z0.value());
}

TEST(Adaptive, IdenticalKernelsSplitEvenly) {
  Rng rng = make_rng(9, Stream::Init);
  Tape<double> tape;
  const auto z = tape.constant(random_tensor(Shape{4, 8}, rng));
  const AdaptiveParams<double> p{random_tensor(Shape{8, 8}, rng), random_tensor(Shape{1, 8}, rng)};
  const auto out = adaptive_aggregate(std::vector<Vd>{z, z}, bind_adaptive(tape, p));
  for (double a : out.alpha.value().values()) EXPECT_DOUBLE_EQ(a, 0.5);
  EXPECT_LT(oracle::max_abs_diff(out.z.value().values(), z.value().values()), 1e-15);
}

TEST(Adaptive, SimplexAndConvexHullProperty) {
  Rng rng = make_rng(10, Stream::Init);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8), kernels = 1 + uniform_index(rng, 4);
    Tape<double> tape;
    std::vector<Vd> zs;
    for (std::size_t k = 0; k < kernels; ++k) zs.push_back(tape.constant(random_tensor(Shape{n, 6}, rng)));
    const AdaptiveParams<double> p{random_tensor(Shape{6, 6}, rng), random_tensor(Shape{1, 6}, rng)};
    const auto out = adaptive_aggregate(zs, bind_adaptive(tape, p));
    const Td& alpha = out.alpha.value();
    ASSERT_EQ(alpha.shape(), (Shape{n, kernels}));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (double a : alpha.row(i)) {
        ASSERT_GE(a, 0.0);
        s += a;
      }
      ASSERT_NEAR(s, 1.0, 1e-6);
      for (std::size_t c = 0; c < 6; ++c) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& z : zs) {
          lo = std::min(lo, z.value().at(i, c));
          hi = std::max(hi, z.value().at(i, c));
        }
        ASSERT_GE(out.z.value().at(i, c), lo - 1e-12);
        ASSERT_LE(out.z.value().at(i, c), hi + 1e-12);
      }
    }
  }
}

TEST(Adaptive, MatchesOracle) {
  Rng rng = make_rng(11, Stream::Init);
  std::vector<Td> zs;
  std::vector<oracle::DenseMatrix> dz;
  for (int k = 0; k < 4; ++k) {
    zs.push_back(random_tensor(Shape{6, 5}, rng));
    dz.push_back(dense(zs.back()));
  }
  const AdaptiveParams<double> p{random_tensor(Shape{5, 5}, rng), random_tensor(Shape{1, 5}, rng)};
  Tape<double> tape;
  std::vector<Vd> vz;
  for (const auto& z : zs) vz.push_back(tape.constant(z));
  const auto out = adaptive_aggregate(vz, bind_adaptive(tape, p));
  const auto ref = oracle::naive_adaptive_aggregate(dz, dense(p.proj), dense(p.score));
  EXPECT_LT(oracle::max_abs_diff(out.z.value().values(), ref.z.values), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(out.alpha.value().values(), ref.alpha.values), 1e-12);
}

TEST(Aggregators, VariantWidthsAndValues) {
  Tape<double> tape;
  const auto a = tape.constant(Td::matrix({{1, 2}}));
  const auto b = tape.constant(Td::matrix({{3, 6}}));
  const std::vector<Vd> zs{a, b};
  EXPECT_EQ(aggregate_variant(zs, Aggregator::Sum).value(), Td::matrix({{4, 8}}));
  EXPECT_EQ(aggregate_variant(zs, Aggregator::Average).value(), Td::matrix({{2, 4}}));
  const auto proj = tape.constant(Td::matrix({{1, 0}, {0, 1}, {0, 0}, {0, 0}}));
  EXPECT_EQ(aggregate_variant(zs, Aggregator::Concatenate, std::optional<Vd>(proj)).value(), Td::matrix({{1, 2}}));
  EXPECT_EQ(aggregate_variant(std::vector<Vd>{a}, Aggregator::Single).value(), a.value());
  EXPECT_THROW(aggregate_variant(zs, Aggregator::Single), ConfigError);
}

TEST(Aggregators, NamesRoundTrip) {
  for (auto a : {Aggregator::Adaptive, Aggregator::Sum, Aggregator::Average, Aggregator::Concatenate})
    EXPECT_EQ(parse_aggregator(to_string(a)), a);
  EXPECT_THROW(parse_aggregator("median"), ConfigError);
}

TEST(SpecialCases, SatLikeAtHopZeroIsVanilla) {
  const auto plans = special_case_kernels(SpecialCase::SATLike, 0, 2);
  ASSERT_EQ(plans.size(), 2u);
  for (const auto& p : plans) {
    ASSERT_EQ(p.kernels.size(), 1u);
    EXPECT_EQ(p.kernels[0], (KernelSpec{0, false}));
  }
  const auto gt = special_case_kernels(SpecialCase::GraphTransLike, 2, 3);
  EXPECT_EQ(gt[0].kernels[0], (KernelSpec{2, true}));
  EXPECT_EQ(gt[1].kernels[0], (KernelSpec{0, false}));
}

TEST(MnaConfig, PlanAndValidation) {
  MnaConfig cfg = small_config(3);
  EXPECT_EQ(cfg.plan().kernels.size(), 4u);
  cfg.hops = {0, 2};
  EXPECT_EQ(cfg.plan().kernels.size(), 2u);
  cfg.max_hop = -1;
  cfg.hops.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(MnaForward, PermutationEquivariance) {
  Rng rng = make_rng(12, Stream::Init);
  for (auto agg : {Aggregator::Adaptive, Aggregator::Sum, Aggregator::Average, Aggregator::Concatenate}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + uniform_index(rng, 8);
      MnaConfig cfg = small_config(2);
      cfg.aggregator = agg;
      const KernelPlan plan = cfg.plan();
      const auto params = init_mna_params<double>(cfg, plan, rng);
      const Graph g = random_graph(n, 0.5, cfg.dim, rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      shuffle(perm.begin(), perm.end(), rng);
      const Graph pg = permute_nodes(g, perm);
      const std::vector<std::size_t> offsets{0, n};
      auto run = [&](const Graph& x) {
        Tape<double> tape;
        return mna_forward(tape.constant(x.features), normalized_adjacency(x, NormalizationKind::Symmetric),
                           std::span<const std::size_t>(offsets), plan, bind(tape, params), cfg)
            .z.value();
      };
      const Td z = run(g), pz = run(pg);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cfg.dim; ++c) ASSERT_NEAR(pz.at(perm[i], c), z.at(i, c), 1e-6);
    }
  }
}
