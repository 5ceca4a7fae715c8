#include "rcnds/ops/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rcnds::ops {
namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("gradient check: non-finite ") + what);
  return v;
}

}  // namespace

GradCheckResult gradient_check(const GradCheckProblem& problem, const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ConfigError("gradient check: epsilon must be positive");
  if (problem.variables.size() != problem.names.size()) {
    throw ConfigError("gradient check: one name per variable required");
  }
  const std::vector<Tensor<double>> analytic = problem.analytic();
  if (analytic.size() != problem.variables.size()) {
    throw ShapeError("gradient check: analytic gradient count does not match variables");
  }
  checked(problem.loss(), "loss");

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t v = 0; v < problem.variables.size(); ++v) {
    Tensor<double>& var = *problem.variables[v];
    require_same_shape(var, analytic[v], "gradient check");

    std::vector<std::size_t> entries(var.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_variable > 0 && entries.size() > options.max_entries_per_variable) {
      // Partial Fisher-Yates: the first max_entries slots become a random sample.
      for (std::size_t i = 0; i < options.max_entries_per_variable; ++i) {
        std::swap(entries[i], entries[i + rng.below(entries.size() - i)]);
      }
      entries.resize(options.max_entries_per_variable);
    }

    for (std::size_t idx : entries) {
      if (problem.skip && problem.skip(v, idx)) continue;
      const double saved = var[idx];
      var[idx] = saved + options.epsilon;
      const double up = checked(problem.loss(), "loss");
      var[idx] = saved - options.epsilon;
      const double down = checked(problem.loss(), "loss");
      var[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double exact = checked(analytic[v][idx], "analytic gradient");
      const double denom = std::max({std::abs(exact), std::abs(numeric), options.floor});
      const double rel = std::abs(exact - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error || result.worst_variable.empty()) {
        result.max_relative_error = rel;
        result.worst_variable = problem.names[v];
        result.worst_index = idx;
        result.worst_analytic = exact;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace rcnds::ops
