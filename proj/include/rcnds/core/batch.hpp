#pragma once

#include <vector>

#include "rcnds/core/tensor.hpp"

namespace rcnds {

/// A minibatch: images (n, c, h, w) and one class index per image.
struct Batch {
  Tensor<float> images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

}  // namespace rcnds
