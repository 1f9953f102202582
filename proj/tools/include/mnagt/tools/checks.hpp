#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mnagt/attention.hpp"

namespace mnagt::checks {

struct CheckResult {
  std::string suite;
  std::string name;
  /// Worst observed error for this check (0 when exact).
  double error = 0;
  double tolerance = 0;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<CheckResult> results;

  bool passed() const;
  std::size_t failures() const;
  void append(const Report& other);
};

struct GradcheckOptions {
  std::size_t nodes = 6;
  std::size_t input_dim = 4;
  std::size_t dim = 16;
  std::size_t heads = 2;
  std::size_t layers = 2;
  int max_hop = 2;
  std::size_t classes = 3;
  Aggregator aggregator = Aggregator::Adaptive;
  std::uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// Analytic vs central-difference gradients of the full model loss, one
/// result per parameter tensor. Error is the larger of the norm-wise relative
/// error over the tensor and the worst elementwise one (floor 1e-6).
Report model_gradient_check(const GradcheckOptions& options = {});

/// The same comparison for every differentiable primitive in isolation, one
/// result per op name, so a broken backward rule is reported by name.
Report op_gradient_checks(std::uint64_t seed = 11, double tolerance = 1e-6);

/// Fast paths against the dense/naive reference implementations on random
/// graphs with n <= 8, c <= 3, m <= 3.
Report oracle_equivalence(std::size_t trials = 50, std::uint64_t seed = 21, double tolerance = 1e-7);

/// Adjacency symmetry, random-walk row sums, permutation invariance and
/// batch/singleton agreement over randomized trials.
Report structural_invariants(std::size_t trials = 100, std::uint64_t seed = 31);

/// c = 0 against vanilla multi-head attention, and the single-kernel
/// SAT-like plan against the restricted adaptive model. Both exact.
Report special_case_reductions(std::size_t trials = 20, std::uint64_t seed = 41);

/// Human-readable lines, one per check.
std::string format_report(const Report& report);

}  // namespace mnagt::checks
