#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rcnds::io {

/// 8-bit image, planar channel-major (c, h, w) like the tensors it feeds.
struct Image8 {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int c, int h, int w, std::uint8_t fill = 0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::uint8_t& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::uint8_t at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  bool operator==(const Image8&) const = default;
};

/// Binary PPM (P6, maxval 255). P5 greymaps are accepted and replicated to
/// three channels. Throws InputError on anything else.
Image8 decode_ppm(const std::string& bytes);
std::string encode_ppm(const Image8& img);

Image8 read_ppm(const std::string& path);
void write_ppm(const Image8& img, const std::string& path);

}  // namespace rcnds::io
