#pragma once

// Synthetic shape-classification images used for desk-scale training runs
// and tests. Each class is one shape kind drawn in a random saturated color
// at a jittered position and size over a dark noisy background.

#include <cstdint>
#include <string>
#include <vector>

#include "rcnds/train/data.hpp"

namespace rcnds::train {

inline constexpr int kToyShapeKinds = 12;

struct ToyOptions {
  int classes = 8;
  int per_class = 64;
  int side = 64;
  std::uint64_t seed = 1;
  int shape_offset = 0;  // class k draws shape kind (shape_offset + k)
};

/// Names of the 12 shape kinds, index = kind.
const std::vector<std::string>& toy_shape_names();

/// Class-interleaved dataset of classes * per_class images.
Dataset make_toy_dataset(const ToyOptions& opts);

/// Writes `<dir>/<class>/<i>.ppm` plus a manifest; returns the manifest path.
std::string write_toy_dataset(const Dataset& d, const std::string& dir, io::Split split);

}  // namespace rcnds::train
