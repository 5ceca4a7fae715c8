#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "rcnds/graph/executor.hpp"
#include "rcnds/graph/graph_spec.hpp"
#include "rcnds/graph/parameters.hpp"
#include "rcnds/io/checkpoint.hpp"
#include "rcnds/train/config.hpp"
#include "rcnds/train/data.hpp"

namespace rcnds::train {

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double alpha = 0.0;
  double train_loss = 0.0;
  double val_top1 = 0.0;  // percent
  double val_top5 = 0.0;  // percent
  double wall_time_s = 0.0;
};

struct TrainResult {
  io::Checkpoint best;  // epoch with the highest val_top1, earliest on ties
  int best_epoch = -1;  // -1 when no epoch ran (best = initial weights)
  double best_val_top1 = 0.0;
  std::vector<EpochMetrics> metrics;
  graph::ParameterSet<float> final_params;
  MeanPixel mean{0, 0, 0};
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Per epoch: shuffled train batches (random crop + mirror, train-mode
/// forward, combined loss at alpha_at(alpha0, epoch, epochs), backward,
/// momentum SGD at lr_at_epoch), then single-center-crop validation.
/// Starts from `initial` when given, else a fresh Gaussian init. Throws
/// DivergedError on a non-finite loss.
TrainResult train(const graph::GraphSpec& g, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}, const graph::ParameterSet<float>* initial = nullptr);

struct Accuracy {
  double top1 = 0.0;  // percent
  double top5 = 0.0;
  int count = 0;
};

/// Eval-mode accuracy with a center crop, or the ten-crop average.
Accuracy evaluate(const graph::GraphSpec& g, const graph::ParameterSet<float>& params, const Dataset& data,
                  const MeanPixel& mean, int crop, int batch, bool ten_crop = false);

/// Mean of the softmax outputs over the ten crops of one image.
std::vector<float> evaluate_10crop(graph::Executor<float>& exec, const graph::ParameterSet<float>& params,
                                   const io::Image8& image, const MeanPixel& mean, int crop);

/// Parameters for g_new taken from `base`: every tensor whose name and
/// shape match is copied; output fc layers whose shape changed (new class
/// count) are re-drawn from N(0, 0.001^2) with zero bias. Anything else
/// missing or mismatched throws CheckpointError.
graph::ParameterSet<float> transfer_parameters(const io::Checkpoint& base, const graph::GraphSpec& g_new, Rng& rng);

/// train() from transfer_parameters(base, g_new). Use fine_tune_defaults()
/// for the standard protocol.
TrainResult fine_tune(const io::Checkpoint& base, const graph::GraphSpec& g_new, const Dataset& train_set,
                      const Dataset& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// `epoch,lr,alpha,train_loss,val_top1,val_top5,wall_time_s`, %.6g values.
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

}  // namespace rcnds::train
