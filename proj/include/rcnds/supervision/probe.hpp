#pragma once

// Gradient-vanishing probe used to decide where a supervision branch goes:
// train a branchless graph briefly from a fresh small-std init and report
// the mean |dL/dW| of every main-branch conv.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rcnds/core/batch.hpp"
#include "rcnds/graph/graph_spec.hpp"

namespace rcnds::supervision {

struct ProbeOptions {
  int iters = 20;
  double threshold = 1e-7;
  double init_std = 0.01;
  // SGD applied between probe iterations; lr = 0 keeps the initial weights.
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct GradProbeRow {
  std::string layer;
  double mean_abs_grad = 0.0;
  bool flagged = false;
};

struct GradProbeReport {
  std::vector<GradProbeRow> rows;  // main-branch convs, input to output
  double threshold = 0.0;
  std::vector<std::string> flagged;
  std::optional<std::string> recommended;  // deepest flagged layer
};

/// Runs `iters` train-mode passes with the main loss only, cycling through
/// `data`. Throws ConfigError if g has branches, InputError on empty data.
GradProbeReport grad_probe(const graph::GraphSpec& g, const std::vector<Batch>& data, const ProbeOptions& options);

/// Flags and recommendation for given per-layer means (in depth order).
GradProbeReport classify(std::vector<GradProbeRow> rows, double threshold);

/// `layer,mean_abs_grad,flagged` rows plus a `# recommended: <layer|none>` footer.
void write_probe_csv(const GradProbeReport& report, std::ostream& os);

}  // namespace rcnds::supervision
