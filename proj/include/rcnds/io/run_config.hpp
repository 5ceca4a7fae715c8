#pragma once

// Run configuration files: a JSON object whose keys are TrainConfig field
// names. Missing keys keep their defaults; unknown keys are an error.
//
//   {"epochs": 60, "base_lr": 0.01, "batch_train": 32, "seed": 7}

#include <string>

#include "rcnds/train/config.hpp"

namespace rcnds::io {

/// Applies the keys of `json_text` on top of `base`. Throws ConfigError on
/// malformed JSON, unknown keys or wrongly typed values.
train::TrainConfig parse_run_config(const std::string& json_text, const train::TrainConfig& base = {});
train::TrainConfig load_run_config(const std::string& path, const train::TrainConfig& base = {});

std::string format_run_config(const train::TrainConfig& cfg);
void save_run_config(const train::TrainConfig& cfg, const std::string& path);

/// Replaces cfg.seed with $RCNDS_SEED when set. Throws ConfigError if the
/// variable is not an unsigned 64-bit integer.
void apply_seed_env(train::TrainConfig& cfg);

}  // namespace rcnds::io
