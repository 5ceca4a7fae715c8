#pragma once

#include <cstdint>

namespace rcnds::train {

/// Every scalar knob of a training run. Defaults follow the full-scale
/// protocol; desk-scale runs override epochs, batches and crop.
struct TrainConfig {
  int epochs = 50;
  double base_lr = 0.01;
  int lr_halving_period = 10;
  int batch_train = 256;
  int batch_val = 128;
  double alpha0 = 0.3;
  int crop = 227;
  int source_side = 256;  // images arrive as source_side x source_side
  double init_std = 0.01;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int threads = 1;  // batch-assembly workers; 1 = assemble inline

  /// Throws ConfigError naming the first bad field.
  void validate() const;
};

/// The fine-tuning protocol: 20 epochs from lr 0.001, halved every 4.
TrainConfig fine_tune_defaults();

/// base_lr * 0.5^min(floor(epoch / period), 5).
double lr_at_epoch(const TrainConfig& cfg, int epoch);

}  // namespace rcnds::train
