#include "rcnds/train/toy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rcnds/core/error.hpp"

namespace rcnds::train {
namespace {

// Membership test in shape-local coordinates: the shape fills roughly the
// unit disk around the origin.
bool inside(int kind, double u, double v) {
  const double au = std::abs(u), av = std::abs(v), r2 = u * u + v * v;
  switch (kind) {
    case 0: return r2 < 1.0;                                                 // disk
    case 1: return std::max(au, av) < 0.8;                                   // square
    case 2: return v > -0.8 && v < 0.8 && au < (v + 0.8) * 0.55;             // triangle
    case 3: return (au < 0.25 && av < 0.9) || (av < 0.25 && au < 0.9);       // plus
    case 4: return r2 > 0.36 && r2 < 1.0;                                    // ring
    case 5: return au < 0.95 && av < 0.25;                                   // hbar
    case 6: return av < 0.95 && au < 0.25;                                   // vbar
    case 7: return au + av < 1.0;                                            // diamond
    case 8: return (std::abs(u - v) < 0.3 || std::abs(u + v) < 0.3) && std::max(au, av) < 0.85;  // cross
    case 9: return std::max(au, av) < 0.85 && std::max(au, av) > 0.5;       // hollow square
    case 10: return (au - 0.5) * (au - 0.5) + v * v < 0.35 * 0.35;          // two dots
    case 11: return r2 < 1.0 && v > 0.0;                                     // half disk
  }
  return false;
}

io::Image8 draw(int kind, int side, Rng& rng) {
  io::Image8 img(3, side, side);
  std::uint8_t bg[3], fg[3];
  for (auto& c : bg) c = static_cast<std::uint8_t>(rng.below(60));
  // Saturated foreground: one channel high, one low, one anywhere.
  const int hi = static_cast<int>(rng.below(3));
  const int lo = (hi + 1 + static_cast<int>(rng.below(2))) % 3;
  for (int c = 0; c < 3; ++c) {
    fg[c] = static_cast<std::uint8_t>(c == hi ? 200 + rng.below(56) : c == lo ? 60 + rng.below(40) : 60 + rng.below(196));
  }
  const double radius = side * (0.22 + 0.12 * rng.uniform());
  const double margin = radius + 1.0;
  const double cx = margin + (side - 2 * margin) * rng.uniform();
  const double cy = margin + (side - 2 * margin) * rng.uniform();
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool in = inside(kind, (x + 0.5 - cx) / radius, (cy - y - 0.5) / radius);
      for (int c = 0; c < 3; ++c) {
        const int noise = static_cast<int>(rng.below(41)) - 20;
        img.at(c, y, x) = static_cast<std::uint8_t>(std::clamp((in ? fg[c] : bg[c]) + noise, 0, 255));
      }
    }
  }
  return img;
}

}  // namespace

const std::vector<std::string>& toy_shape_names() {
  static const std::vector<std::string> names{"disk",  "square", "triangle", "plus",          "ring",     "hbar",
                                              "vbar",  "diamond", "cross",   "hollow_square", "two_dots", "half_disk"};
  return names;
}

Dataset make_toy_dataset(const ToyOptions& opts) {
  if (opts.classes < 1 || opts.per_class < 1 || opts.side < 8) throw ConfigError("toy dataset: bad size");
  if (opts.shape_offset < 0 || opts.shape_offset + opts.classes > kToyShapeKinds) {
    throw ConfigError("toy dataset: only " + std::to_string(kToyShapeKinds) + " shape kinds");
  }
  Dataset d;
  for (int k = 0; k < opts.classes; ++k) d.class_names.push_back(toy_shape_names()[opts.shape_offset + k]);
  const Rng root(opts.seed);
  for (int i = 0; i < opts.per_class; ++i) {
    for (int k = 0; k < opts.classes; ++k) {
      Rng rng = root.fork(static_cast<std::uint64_t>(i) * kToyShapeKinds + k);
      d.images.push_back(draw(opts.shape_offset + k, opts.side, rng));
      d.labels.push_back(k);
    }
  }
  return d;
}

std::string write_toy_dataset(const Dataset& d, const std::string& dir, io::Split split) {
  namespace fs = std::filesystem;
  io::DatasetManifest m;
  m.root = dir;
  m.class_names = d.class_names;
  m.split = split;
  std::vector<int> counts(d.class_names.size(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int label = d.labels[i];
    const std::string rel = d.class_names[label] + "/" + std::to_string(counts[label]++) + ".ppm";
    fs::create_directories(fs::path(dir) / d.class_names[label]);
    io::write_ppm(d.images[i], (fs::path(dir) / rel).string());
    m.entries.push_back({rel, label});
  }
  const std::string path = (fs::path(dir) / (std::string(io::to_string(split)) + ".txt")).string();
  io::write_manifest(m, path);
  return path;
}

}  // namespace rcnds::train
