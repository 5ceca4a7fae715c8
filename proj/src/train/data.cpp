#include "rcnds/train/data.hpp"

#include <algorithm>

namespace rcnds::train {

Dataset load_dataset(const io::DatasetManifest& m, int side) {
  Dataset d;
  d.class_names = m.class_names;
  for (const io::ManifestEntry& e : m.entries) {
    io::Image8 img = io::read_ppm(m.full_path(e));
    if (side > 0 && (img.height != side || img.width != side)) {
      throw InputError("image '" + e.path + "' is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                       ", expected " + std::to_string(side) + "x" + std::to_string(side));
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(e.label);
  }
  return d;
}

MeanPixel mean_pixel(const Dataset& d) {
  std::array<double, 3> sum{0, 0, 0};
  double count = 0;
  for (const io::Image8& img : d.images) {
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int c = 0; c < 3; ++c) {
      std::uint64_t s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += img.data[c * plane + i];
      sum[static_cast<std::size_t>(c)] += static_cast<double>(s);
    }
    count += static_cast<double>(plane);
  }
  MeanPixel m{0, 0, 0};
  if (count > 0) {
    for (std::size_t c = 0; c < 3; ++c) m[c] = static_cast<float>(sum[c] / count);
  }
  return m;
}

Tensor<float> preprocess(const io::Image8& img, const MeanPixel& mean, int source_side) {
  if (img.channels != 3 || img.height != source_side || img.width != source_side) {
    throw InputError("preprocess: expected a 3x" + std::to_string(source_side) + "x" + std::to_string(source_side) +
                     " image, got " + std::to_string(img.channels) + "x" + std::to_string(img.height) + "x" +
                     std::to_string(img.width));
  }
  Tensor<float> t(Shape{1, 3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) t[c * plane + i] = static_cast<float>(img.data[c * plane + i]) - mean[c];
  }
  return t;
}

Tensor<float> crop_view(const Tensor<float>& s, int y, int x, int crop, bool mirror) {
  if (y < 0 || x < 0 || y + crop > s.dim(2) || x + crop > s.dim(3)) throw ShapeError("crop window outside the image");
  Tensor<float> out(Shape{1, s.dim(1), crop, crop});
  for (int c = 0; c < s.dim(1); ++c) {
    for (int i = 0; i < crop; ++i) {
      const float* row = s.data() + s.index(0, c, y + i, x);
      float* dst = out.data() + out.index(0, c, i, 0);
      if (mirror) {
        for (int j = 0; j < crop; ++j) dst[j] = row[crop - 1 - j];
      } else {
        std::copy(row, row + crop, dst);
      }
    }
  }
  return out;
}

Tensor<float> augment_train(const Tensor<float>& sample, int crop, Rng& rng) {
  const int h = sample.dim(2), w = sample.dim(3);
  if (crop < 1 || crop > h || crop > w) throw ConfigError("crop " + std::to_string(crop) + " exceeds the source image");
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - crop + 1)));
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - crop + 1)));
  const bool mirror = rng.bernoulli(0.5);
  return crop_view(sample, y, x, crop, mirror);
}

Tensor<float> center_crop(const Tensor<float>& sample, int crop) {
  return crop_view(sample, (sample.dim(2) - crop) / 2, (sample.dim(3) - crop) / 2, crop, false);
}

std::vector<Tensor<float>> ten_crops(const Tensor<float>& sample, int crop) {
  const int dy = sample.dim(2) - crop, dx = sample.dim(3) - crop;
  if (dy < 0 || dx < 0) throw ConfigError("crop exceeds the source image");
  const int offsets[5][2] = {{0, 0}, {0, dx}, {dy, 0}, {dy, dx}, {dy / 2, dx / 2}};
  std::vector<Tensor<float>> out;
  for (bool mirror : {false, true}) {
    for (const auto& o : offsets) out.push_back(crop_view(sample, o[0], o[1], crop, mirror));
  }
  return out;
}

Tensor<float> stack(const std::vector<Tensor<float>>& samples) {
  if (samples.empty()) throw ShapeError("stack of zero samples");
  const Shape& s = samples[0].shape();
  Tensor<float> out(Shape{static_cast<int>(samples.size()), s[1], s[2], s[3]});
  const std::size_t per = samples[0].size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != s) throw ShapeError("stack: samples differ in shape");
    std::copy(samples[i].vec().begin(), samples[i].vec().end(), out.data() + i * per);
  }
  return out;
}

}  // namespace rcnds::train
