#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rcnds/core/rng.hpp"
#include "rcnds/core/tensor.hpp"

namespace rcnds::ops {

/// A scalar objective over a set of double-precision variables together with
/// its analytic gradient. `loss` re-reads the variables on every call, so the
/// checker can perturb them in place.
struct GradCheckProblem {
  std::vector<std::string> names;
  std::vector<Tensor<double>*> variables;
  std::function<double()> loss;
  std::function<std::vector<Tensor<double>>()> analytic;
  /// Optional: entries to leave out (e.g. relu inputs near the kink).
  std::function<bool(std::size_t variable, std::size_t index)> skip;
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  /// When > 0, probe at most this many randomly chosen entries per variable.
  std::size_t max_entries_per_variable = 0;
  std::uint64_t seed = 7;
  /// Denominator floor. Raise it when the loss is large enough that tiny
  /// gradients sit below finite-difference resolution.
  double floor = 1e-8;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_variable;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Max over probed entries of |analytic - central difference| /
/// max(|analytic|, |central difference|, floor). Throws NumericError when any
/// loss or gradient value is non-finite.
GradCheckResult gradient_check(const GradCheckProblem& problem, const GradCheckOptions& options = {});

}  // namespace rcnds::ops
