#include "rcnds/train/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rcnds/core/error.hpp"

namespace rcnds::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid training config: " + what); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(base_lr > 0)) fail("base_lr must be > 0");
  if (lr_halving_period < 1) fail("lr_halving_period must be >= 1");
  if (batch_train < 1 || batch_val < 1) fail("batch sizes must be >= 1");
  if (!(alpha0 >= 0)) fail("alpha0 must be >= 0");
  if (source_side < 1) fail("source_side must be >= 1");
  if (crop < 1 || crop > source_side) fail("crop must lie in [1, source_side]");
  if (!(init_std >= 0)) fail("init_std must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
}

TrainConfig fine_tune_defaults() {
  TrainConfig c;
  c.epochs = 20;
  c.base_lr = 0.001;
  c.lr_halving_period = 4;
  return c;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  const int halvings = std::min(std::max(epoch, 0) / cfg.lr_halving_period, 5);
  return cfg.base_lr * std::ldexp(1.0, -halvings);
}

}  // namespace rcnds::train
