#include <gtest/gtest.h>

#include "mnagt/tape.hpp"
#include "mnagt/tools/checks.hpp"

using namespace mnagt;

namespace {

struct FaultGuard {
  explicit FaultGuard(std::vector<std::string> ops) { fault::flip_backward_sign(std::move(ops)); }
  ~FaultGuard() { fault::clear(); }
};

std::vector<std::string> failing(const checks::Report& r) {
  std::vector<std::string> names;
  for (const auto& c : r.results)
    if (!c.passed) names.push_back(c.name);
  return names;
}

}  // namespace

TEST(Checks, OpGradientsPass) {
  const auto r = checks::op_gradient_checks();
  EXPECT_TRUE(r.passed()) << checks::format_report(r);
  EXPECT_GE(r.results.size(), 20u);
}

// A sign flip in one backward rule must be reported under that op's name
// (and its variants, such as gelu_erf or attention_dropout) and nowhere else.
class FaultDetection : public ::testing::TestWithParam<std::string> {};

TEST_P(FaultDetection, NamesTheBrokenOp) {
  const FaultGuard guard({GetParam()});
  const auto r = checks::op_gradient_checks();
  const auto names = failing(r);
  ASSERT_FALSE(names.empty());
  EXPECT_EQ(names.front(), GetParam());
  for (const auto& n : names) EXPECT_EQ(n.rfind(GetParam(), 0), 0u) << n;
}

INSTANTIATE_TEST_SUITE_P(Ops, FaultDetection,
                         ::testing::Values("matmul", "add_row", "mul_col", "softmax_rows", "layer_norm", "gelu",
                                           "cross_entropy", "pool_segments", "propagate", "attention"));

TEST(Checks, ModelGradientFailsUnderFault) {
  checks::GradcheckOptions opt;
  opt.nodes = 4;
  opt.dim = 8;
  opt.layers = 1;
  EXPECT_TRUE(checks::model_gradient_check(opt).passed());
  const FaultGuard guard({"softmax_rows"});
  EXPECT_FALSE(checks::model_gradient_check(opt).passed());
}

TEST(Checks, FastSuitesPassWithFewTrials) {
  checks::Report r = checks::oracle_equivalence(5);
  r.append(checks::structural_invariants(5));
  r.append(checks::special_case_reductions(3));
  EXPECT_TRUE(r.passed()) << checks::format_report(r);
}

TEST(Checks, FormatReportOneLinePerCheck) {
  checks::Report r;
  r.results.push_back({"grad.op", "matmul", 1e-9, 1e-6, true, ""});
  r.results.push_back({"grad.op", "tanh", 1.0, 1e-6, false, ""});
  const std::string text = checks::format_report(r);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("FAIL grad.op tanh"), std::string::npos);
  EXPECT_EQ(r.failures(), 1u);
}
