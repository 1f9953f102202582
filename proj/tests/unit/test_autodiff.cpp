#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mnagt/ops.hpp"
#include "mnagt/oracle/oracle.hpp"
#include "mnagt/tape.hpp"

using namespace mnagt;
using Td = Tensor<double>;
using Vd = Var<double>;

namespace {

Td random_tensor(Shape shape, Rng& rng) {
  Td t(std::move(shape));
  for (auto& v : t.values()) v = uniform(rng, -1, 1);
  return t;
}

std::vector<double> flat(const Td& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, ShapeMatchesData) {
  Td t(Shape{3, 4});
  EXPECT_EQ(t.size(), 12u);
  EXPECT_THROW(Td(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Td(Shape{1, 2, 3}), DimensionError);
  EXPECT_EQ(Td::scalar(2.0).size(), 1u);
}

TEST(Matmul, IdentityAndProjector) {
  Tape<double> tape;
  auto i2 = tape.constant(Td::matrix({{1, 0}, {0, 1}}));
  auto m = tape.constant(Td::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(ops::matmul(i2, m).value(), Td::matrix({{1, 2}, {3, 4}}));
  auto p = tape.constant(Td::matrix({{1, 0}, {0, 0}}));
  auto v = tape.constant(Td::matrix({{5}, {7}}));
  EXPECT_EQ(ops::matmul(p, v).value(), Td::matrix({{5}, {0}}));
}

TEST(Matmul, InnerDimensionMismatchNamesShapes) {
  Tape<double> tape;
  auto a = tape.constant(Td(Shape{2, 3}));
  auto b = tape.constant(Td(Shape{2, 3}));
  try {
    ops::matmul(a, b);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Softmax, SymmetricRows) {
  Tape<double> tape;
  const Td out = ops::softmax_rows(tape.constant(Td::matrix({{0, 0}}))).value();
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
  const Td thirds = ops::softmax_rows(tape.constant(Td::matrix({{1, 1, 1}}))).value();
  for (double v : thirds.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Tape<double> tape;
  const Td out = ops::softmax_rows(tape.constant(Td::matrix({{1000, 0}}))).value();
  // Shifted by the row max: exp(0) / (exp(0) + exp(-1000)).
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], std::exp(-1000.0));
}

TEST(Softmax, RejectsNonFinite) {
  Tape<double> tape;
  EXPECT_THROW(ops::softmax_rows(tape.constant(Td::matrix({{NAN, 0}}))), NumericError);
}

TEST(Softmax, RowsSumToOneProperty) {
  Rng rng = make_rng(3, Stream::Data);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8), m = 1 + uniform_index(rng, 8);
    Td x(Shape{n, m});
    for (auto& v : x.values()) v = uniform(rng, -50, 50);
    Tape<double> tape;
    const Td p = ops::softmax_rows(tape.constant(x)).value();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (double v : p.row(i)) s += v;
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(LayerNorm, ConstantRowIsZero) {
  Tape<double> tape;
  const Td out = ops::layer_norm(tape.constant(Td::matrix({{2, 2, 2}})), tape.constant(Td(Shape{3}, 1.0)),
                                 tape.constant(Td(Shape{3}, 0.0)))
                     .value();
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, AlreadyNormalizedRow) {
  Tape<double> tape;
  const Td out = ops::layer_norm(tape.constant(Td::matrix({{1, -1}})), tape.constant(Td(Shape{2}, 1.0)),
                                 tape.constant(Td(Shape{2}, 0.0)), 1e-12)
                     .value();
  EXPECT_NEAR(out[0], 1.0, 1e-11);
  EXPECT_NEAR(out[1], -1.0, 1e-11);
}

TEST(LayerNorm, RowStatistics) {
  Rng rng = make_rng(4, Stream::Data);
  Tape<double> tape;
  const Td out = ops::layer_norm(tape.constant(random_tensor(Shape{4, 8}, rng)), tape.constant(Td(Shape{8}, 1.0)),
                                 tape.constant(Td(Shape{8}, 0.0)))
                     .value();
  for (std::size_t i = 0; i < 4; ++i) {
    double mean = 0, var = 0;
    for (double v : out.row(i)) mean += v / 8;
    for (double v : out.row(i)) var += (v - mean) * (v - mean) / 8;
    EXPECT_LT(std::abs(mean), 1e-7);
    EXPECT_NEAR(var, 1.0, 1e-4);  // eps = 1e-5 shrinks the variance slightly
  }
}

TEST(Activations, PointValues) {
  Tape<double> tape;
  EXPECT_EQ(ops::gelu(tape.constant(Td::scalar(0.0))).value()[0], 0.0);
  EXPECT_EQ(ops::relu(tape.constant(Td::scalar(-3.0))).value()[0], 0.0);
  EXPECT_EQ(ops::relu(tape.constant(Td::scalar(3.0))).value()[0], 3.0);
  // 0.5 (1 + tanh(sqrt(2/pi) * 1.044715))
  EXPECT_NEAR(ops::gelu_value(1.0, ops::GeluForm::Tanh), 0.8411919906082768, 1e-14);
  // 0.5 (1 + erf(1/sqrt 2))
  EXPECT_NEAR(ops::gelu_value(1.0, ops::GeluForm::Erf), 0.8413447460685429, 1e-14);
}

TEST(ConcatCols, PreservesColumnOrder) {
  Tape<double> tape;
  const Td out = ops::concat_cols(std::vector<Vd>{tape.constant(Td::matrix({{1}, {2}})),
                                                  tape.constant(Td::matrix({{3, 4}, {5, 6}}))})
                     .value();
  EXPECT_EQ(out, Td::matrix({{1, 3, 4}, {2, 5, 6}}));
}

TEST(Reductions, RowsAndTranspose) {
  Tape<double> tape;
  const auto x = tape.constant(Td::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(ops::sum_rows(x).value(), Td(Shape{1, 2}, std::vector<double>{4, 6}));
  EXPECT_EQ(ops::mean_rows(x).value(), Td(Shape{1, 2}, std::vector<double>{2, 3}));
  EXPECT_EQ(ops::transpose(x).value(), Td::matrix({{1, 3}, {2, 4}}));
}

TEST(Dropout, IdentityCases) {
  Rng rng = make_rng(1, Stream::Dropout);
  Tape<double> tape;
  const auto x = tape.constant(random_tensor(Shape{3, 3}, rng));
  EXPECT_EQ(ops::dropout(x, 0.0, true, rng).value(), x.value());
  EXPECT_EQ(ops::dropout(x, 0.5, false, rng).value(), x.value());
  EXPECT_THROW(ops::dropout(x, 1.0, true, rng), ConfigError);
  EXPECT_THROW(ops::dropout(x, -0.1, true, rng), ConfigError);
}

TEST(Dropout, SurvivorFractionAndScaling) {
  Rng rng = make_rng(2, Stream::Dropout);
  Tape<double> tape;
  const Td out = ops::dropout(tape.constant(Td(Shape{100, 100}, 1.0)), 0.5, true, rng).value();
  std::size_t kept = 0;
  for (double v : out.values()) {
    if (v != 0.0) {
      ++kept;
      EXPECT_DOUBLE_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1e4, 0.5, 0.02);
}

TEST(Dropout, SameSeedSameMask) {
  Tape<double> tape;
  const auto x = tape.constant(Td(Shape{10, 10}, 1.0));
  Rng a = make_rng(8, Stream::Dropout), b = make_rng(8, Stream::Dropout);
  const Td first = ops::dropout(x, 0.3, true, a).value();
  EXPECT_EQ(first, ops::dropout(x, 0.3, true, b).value());
}

TEST(CrossEntropy, UniformAndSaturated) {
  Tape<double> tape;
  const std::vector<int> zero{0};
  EXPECT_NEAR(ops::cross_entropy_logits(tape.constant(Td::matrix({{0, 0}})), std::span<const int>(zero)).value()[0],
              std::log(2.0), 1e-15);
  const Td scaled = Td::matrix({{20, 0, 0}});
  EXPECT_LT(ops::cross_entropy_logits(tape.constant(scaled), std::span<const int>(zero)).value()[0], 1e-3);
}

TEST(CrossEntropy, LabelOutOfRange) {
  Tape<double> tape;
  const std::vector<int> bad{2};
  EXPECT_THROW(ops::cross_entropy_logits(tape.constant(Td::matrix({{0, 0}})), std::span<const int>(bad)), DataError);
}

TEST(Backward, SumGivesOnes) {
  Tape<double> tape;
  const auto x = tape.leaf(Td(Shape{2, 3}, 0.5).set_requires_grad());
  tape.backward(ops::sum(x));
  for (double g : tape.grad(x).values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareAtThree) {
  Tape<double> tape;
  const auto x = tape.leaf(Td(Shape{1}, 3.0).set_requires_grad());
  tape.backward(ops::sum(ops::mul(x, x)));
  EXPECT_EQ(tape.grad(x)[0], 6.0);
}

TEST(Backward, DiamondAccumulatesBothPaths) {
  Tape<double> tape;
  const auto x = tape.leaf(Td::matrix({{1, 2}, {3, 4}}).set_requires_grad());
  const auto a = ops::scale(x, 2.0);
  const auto b = ops::tanh(x);
  tape.backward(ops::sum(ops::add(a, b)));
  const Td& g = tape.grad(x);
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = std::tanh(x.value()[i]);
    EXPECT_NEAR(g[i], 2.0 + (1 - t * t), 1e-15);
  }
}

TEST(Backward, EveryGradLeafGetsSameShapeGradient) {
  Tape<double> tape;
  const auto x = tape.leaf(Td(Shape{2, 3}, 1.0).set_requires_grad());
  const auto unused = tape.leaf(Td(Shape{4}, 1.0).set_requires_grad());
  tape.backward(ops::sum(x));
  EXPECT_EQ(tape.grad(x).shape(), x.shape());
  EXPECT_EQ(tape.grad(unused).shape(), unused.shape());
  for (double g : tape.grad(unused).values()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RequiresScalarLoss) {
  Tape<double> tape;
  const auto x = tape.leaf(Td(Shape{2, 2}, 1.0).set_requires_grad());
  EXPECT_THROW(tape.backward(ops::scale(x, 2.0)), AutodiffError);
}

TEST(Backward, RequiresGradEnabledLeaf) {
  Tape<double> tape;
  const auto x = tape.constant(Td(Shape{2, 2}, 1.0));
  EXPECT_THROW(tape.backward(ops::sum(x)), AutodiffError);
}

TEST(Backward, SecondCallWithoutResetIsRejected) {
  Tape<double> tape;
  const auto x = tape.leaf(Td(Shape{2}, 1.0).set_requires_grad());
  const auto loss = ops::sum(ops::mul(x, x));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), AutodiffError);
  tape.zero_grad();
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x)[0], 2.0);  // not 4: nothing carried over
}

// Every differentiable primitive against central differences on random
// shapes up to 8 x 8.
TEST(GradientProperty, PrimitivesMatchFiniteDifferences) {
  using Build = std::function<Vd(const std::vector<Vd>&)>;
  struct Case {
    const char* name;
    std::function<std::vector<Td>(std::size_t, std::size_t, Rng&)> inputs;
    Build build;
  };
  auto one = [](std::size_t n, std::size_t m, Rng& r) { return std::vector<Td>{random_tensor(Shape{n, m}, r)}; };
  auto two = [](std::size_t n, std::size_t m, Rng& r) {
    return std::vector<Td>{random_tensor(Shape{n, m}, r), random_tensor(Shape{n, m}, r)};
  };
  const std::vector<Case> cases{
      {"matmul", [](std::size_t n, std::size_t m, Rng& r) {
         return std::vector<Td>{random_tensor(Shape{n, m}, r), random_tensor(Shape{m, 3}, r)};
       }, [](const std::vector<Vd>& v) { return ops::matmul(v[0], v[1]); }},
      {"add", two, [](const std::vector<Vd>& v) { return ops::add(v[0], v[1]); }},
      {"mul", two, [](const std::vector<Vd>& v) { return ops::mul(v[0], v[1]); }},
      {"add_row", [](std::size_t n, std::size_t m, Rng& r) {
         return std::vector<Td>{random_tensor(Shape{n, m}, r), random_tensor(Shape{1, m}, r)};
       }, [](const std::vector<Vd>& v) { return ops::add_row(v[0], v[1]); }},
      {"mul_col", [](std::size_t n, std::size_t m, Rng& r) {
         return std::vector<Td>{random_tensor(Shape{n, m}, r), random_tensor(Shape{n, 1}, r)};
       }, [](const std::vector<Vd>& v) { return ops::mul_col(v[0], v[1]); }},
      {"transpose", one, [](const std::vector<Vd>& v) { return ops::transpose(v[0]); }},
      {"mean_rows", one, [](const std::vector<Vd>& v) { return ops::mean_rows(v[0]); }},
      {"tanh", one, [](const std::vector<Vd>& v) { return ops::tanh(v[0]); }},
      {"gelu", one, [](const std::vector<Vd>& v) { return ops::gelu(v[0]); }},
      {"softmax_rows", one, [](const std::vector<Vd>& v) { return ops::softmax_rows(v[0]); }},
      {"layer_norm", [](std::size_t n, std::size_t m, Rng& r) {
         return std::vector<Td>{random_tensor(Shape{n, m + 1}, r), random_tensor(Shape{m + 1}, r),
                                random_tensor(Shape{m + 1}, r)};
       }, [](const std::vector<Vd>& v) { return ops::layer_norm(v[0], v[1], v[2]); }},
      {"concat_cols", two, [](const std::vector<Vd>& v) { return ops::concat_cols(std::vector<Vd>{v[0], v[1]}); }},
  };

  Rng rng = make_rng(17, Stream::Data);
  for (const auto& c : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 1 + uniform_index(rng, 8), m = 1 + uniform_index(rng, 8);
      std::vector<Td> in = c.inputs(n, m, rng);
      Tape<double> tape;
      std::vector<Vd> leaves;
      for (auto t : in) leaves.push_back(tape.leaf(t.set_requires_grad()));
      // Weighted sum so the upstream gradient is not uniform.
      const Vd out = c.build(leaves);
      const Td w = random_tensor(out.shape(), rng);
      tape.backward(ops::sum(ops::mul(out, tape.constant(w))));
      for (std::size_t i = 0; i < in.size(); ++i) {
        auto f = [&] {
          Tape<double> t;
          std::vector<Vd> cs;
          for (const auto& x : in) cs.push_back(t.constant(x));
          const Td o = c.build(cs).value();
          double acc = 0;
          for (std::size_t j = 0; j < o.size(); ++j) acc += o[j] * w[j];
          return acc;
        };
        const auto numeric = oracle::numerical_gradient(f, in[i].values());
        const double err = oracle::normwise_relative_error(flat(tape.grad(leaves[i])), numeric);
        ASSERT_LT(err, 1e-5) << c.name << " input " << i << " shape " << n << "x" << m;
      }
    }
  }
}
