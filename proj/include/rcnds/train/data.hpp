#pragma once

// In-memory datasets and the image pipeline: mean subtraction, random
// crop + mirror for training, center and ten-crop views for evaluation.

#include <array>
#include <string>
#include <vector>

#include "rcnds/core/batch.hpp"
#include "rcnds/core/rng.hpp"
#include "rcnds/io/image.hpp"
#include "rcnds/io/manifest.hpp"

namespace rcnds::train {

using MeanPixel = std::array<float, 3>;

struct Dataset {
  std::vector<io::Image8> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Decodes every manifest entry. Throws InputError if an image is not
/// `side` x `side` (when side > 0).
Dataset load_dataset(const io::DatasetManifest& m, int side = 0);

/// Per-channel mean over every pixel of every image.
MeanPixel mean_pixel(const Dataset& d);

/// Float conversion and per-channel mean subtraction; result (1, 3, S, S).
/// Throws InputError unless the image is source_side x source_side RGB.
Tensor<float> preprocess(const io::Image8& img, const MeanPixel& mean, int source_side);

/// crop x crop window at (y, x), optionally mirrored left-right.
Tensor<float> crop_view(const Tensor<float>& sample, int y, int x, int crop, bool mirror);

/// Uniform offset in [0, S - crop]^2, then a mirror with probability 1/2.
/// Throws ConfigError when crop exceeds the source side.
Tensor<float> augment_train(const Tensor<float>& sample, int crop, Rng& rng);

Tensor<float> center_crop(const Tensor<float>& sample, int crop);

/// Four corners and the center, followed by the mirror of each.
std::vector<Tensor<float>> ten_crops(const Tensor<float>& sample, int crop);

/// Stacks (1, c, h, w) samples into one (n, c, h, w) tensor.
Tensor<float> stack(const std::vector<Tensor<float>>& samples);

}  // namespace rcnds::train
