#pragma once

#include <string>

#include "rcnds/graph/graph_spec.hpp"

namespace rcnds::graph {

/// Desk-scale knobs. Defaults reproduce the full-size architectures.
struct PresetOptions {
  /// Divides every channel count and fc width (64/128/256/512, 4096, the
  /// branch 128/1024). Floors at 1.
  int width_divisor = 1;
  /// conv1 at stride 1 and pool1 as 2x2/2, so that five halvings still fit
  /// 32x32 and 64x64 inputs. Layer counts are unchanged.
  bool compact_stem = false;
};

/// "cnds8", "rcnds8" or "rcnds10". Residual presets come back with their
/// projections already inserted.
GraphSpec build_preset(const std::string& name, int num_classes, CHW input, const PresetOptions& options = {});

/// The DSL text a preset is built from (joins unresolved).
std::string preset_source(const std::string& name, int num_classes, CHW input, const PresetOptions& options = {});

}  // namespace rcnds::graph
