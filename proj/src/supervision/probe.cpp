#include "rcnds/supervision/probe.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>

#include "rcnds/graph/executor.hpp"
#include "rcnds/graph/parameters.hpp"
#include "rcnds/supervision/loss.hpp"
#include "rcnds/train/sgd.hpp"

namespace rcnds::supervision {

GradProbeReport classify(std::vector<GradProbeRow> rows, double threshold) {
  GradProbeReport r;
  r.threshold = threshold;
  for (GradProbeRow& row : rows) {
    row.flagged = row.mean_abs_grad < threshold;
    if (row.flagged) {
      r.flagged.push_back(row.layer);
      r.recommended = row.layer;
    }
  }
  r.rows = std::move(rows);
  return r;
}

GradProbeReport grad_probe(const graph::GraphSpec& g, const std::vector<Batch>& data, const ProbeOptions& o) {
  if (!g.branches.empty()) throw ConfigError("grad_probe expects a branchless graph; prune the branches first");
  if (data.empty()) throw InputError("grad_probe: empty data stream");
  if (o.iters < 1) throw ConfigError("grad_probe: iters must be >= 1");
  if (o.iters < 10 || o.iters > 50) spdlog::warn("grad_probe: {} iterations is outside the usual 10..50", o.iters);

  Rng rng(o.seed);
  Rng init_rng = rng.fork(1), drop_rng = rng.fork(2);
  graph::ParameterSet<float> params = graph::init_parameters(g, o.init_std, init_rng);
  graph::ParameterSet<float> velocity = params.zeros_like();
  graph::Executor<float> exec(g);

  std::vector<std::size_t> slots;
  std::vector<GradProbeRow> rows;
  for (const graph::LayerNode& n : g.nodes) {
    if (n.kind != graph::LayerKind::kConv || n.group != 0) continue;
    slots.push_back(params.index_of(graph::group_prefix(0) + "." + n.name + ".weight"));
    rows.push_back({n.name, 0.0, false});
  }

  for (int it = 0; it < o.iters; ++it) {
    const Batch& b = data[static_cast<std::size_t>(it) % data.size()];
    auto logits = exec.forward(params, b.images, ops::Mode::kTrain, drop_rng);
    auto obj = combined_objective(g, logits, b.labels, 0.0);
    if (!std::isfinite(obj.report.main_loss)) throw NumericError("grad_probe: non-finite loss");
    auto grads = exec.backward(params, obj.logit_grads);
    for (std::size_t l = 0; l < slots.size(); ++l) {
      const Tensor<float>& gw = grads[slots[l]];
      double sum = 0.0;
      for (float v : gw.vec()) sum += std::abs(static_cast<double>(v));
      rows[l].mean_abs_grad += sum / static_cast<double>(gw.size());
    }
    if (o.lr > 0) train::sgd_step(params, grads, velocity, o.lr, o.momentum, 0.0);
  }
  for (GradProbeRow& r : rows) r.mean_abs_grad /= o.iters;
  return classify(std::move(rows), o.threshold);
}

void write_probe_csv(const GradProbeReport& report, std::ostream& os) {
  os << "layer,mean_abs_grad,flagged\n";
  char buf[64];
  for (const GradProbeRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.6g", r.mean_abs_grad);
    os << r.layer << ',' << buf << ',' << (r.flagged ? 1 : 0) << '\n';
  }
  os << "# recommended: " << report.recommended.value_or("none") << '\n';
}

}  // namespace rcnds::supervision
