#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "mnagt/oracle/oracle.hpp"

using namespace mnagt::oracle;

// The oracle is only useful if it is right on cases small enough to work
// out by hand.

TEST(OracleAdjacency, PathByHand) {
  const DenseMatrix a = dense_normalized_adjacency(3, {{1, 0}, {1, 2}, {1, 2}, {2, 2}}, true);
  const double s = 1 / std::sqrt(6.0);
  const std::vector<double> expected{0.5, s, 0, s, 1.0 / 3, s, 0, s, 0.5};
  EXPECT_LT(max_abs_diff(a.values, expected), 1e-15);
  const DenseMatrix rw = dense_normalized_adjacency(3, {{0, 1}, {1, 2}}, false);
  EXPECT_DOUBLE_EQ(rw(1, 0), 1.0 / 3);
  EXPECT_DOUBLE_EQ(rw(0, 1), 0.5);
}

TEST(OraclePropagate, PowersOfAdjacency) {
  const DenseMatrix a(2, 2, {0.5, 0.5, 0.5, 0.5});
  const DenseMatrix h(2, 1, {1, 3});
  EXPECT_EQ(dense_power_propagate(a, h, 0).values, h.values);
  EXPECT_EQ(dense_power_propagate(a, h, 3).values, (std::vector<double>{2, 2}));
}

TEST(OracleAttention, UniformWhenQueriesVanish) {
  const DenseMatrix q(3, 2), k(3, 2, {1, 2, 3, 4, 5, 6}), v(3, 1, {3, 6, 9});
  const DenseMatrix out = naive_attention(q, k, v);
  for (double x : out.values) EXPECT_NEAR(x, 6.0, 1e-15);
}

TEST(OracleAttention, TwoKeysByHand) {
  // Logits 0 and 2/sqrt(2): weight on the second key is 1 / (1 + e^-sqrt 2).
  const DenseMatrix q(1, 2, {1, 1}), k(2, 2, {0, 0, 1, 1});
  const DenseMatrix w = naive_attention_weights(q, k);
  EXPECT_NEAR(w(0, 1), 1 / (1 + std::exp(-std::sqrt(2.0))), 1e-15);
  EXPECT_NEAR(w(0, 0) + w(0, 1), 1.0, 1e-15);
}

TEST(OracleAdaptive, EqualScoresGiveEqualWeights) {
  const DenseMatrix z0(1, 2, {1, 0}), z1(1, 2, {0, 1});
  // A zero scoring vector makes every kernel score 0.
  const auto r = naive_adaptive_aggregate({z0, z1}, DenseMatrix::identity(2), DenseMatrix(1, 2));
  EXPECT_DOUBLE_EQ(r.alpha(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.z(0, 1), 0.5);
}

TEST(OracleGradient, CentralDifferences) {
  std::vector<double> theta{3.0, -1.0};
  const auto g = numerical_gradient([&] { return theta[0] * theta[0] + 4 * theta[1]; }, theta);
  EXPECT_NEAR(g[0], 6.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
  // theta is restored after probing.
  EXPECT_EQ(theta[0], 3.0);
  EXPECT_THROW(numerical_gradient([] { return NAN; }, theta), std::domain_error);
}

TEST(OracleMetrics, ErrorDefinitions) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  const std::vector<double> a{3, 4}, b{3, 4.5};
  EXPECT_DOUBLE_EQ(normwise_relative_error(a, b), 0.5 / std::hypot(3.0, 4.5));
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 0.5);
}

TEST(OracleShapes, MismatchThrows) {
  EXPECT_THROW(multiply(DenseMatrix(2, 3), DenseMatrix(2, 3)), std::invalid_argument);
  EXPECT_THROW(add(DenseMatrix(2, 3), DenseMatrix(3, 2)), std::invalid_argument);
  EXPECT_EQ(hstack({DenseMatrix(2, 1, {1, 2}), DenseMatrix(2, 1, {3, 4})}).values, (std::vector<double>{1, 3, 2, 4}));
}
