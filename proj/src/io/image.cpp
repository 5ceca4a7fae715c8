#include "rcnds/io/image.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "rcnds/core/error.hpp"

namespace rcnds::io {
namespace {

// Header token reader: skips whitespace and `#` comments.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& b) : b_(b) {}

  int number(const char* what) {
    skip();
    std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_ || pos_ - start > 9) throw InputError(std::string("PPM: bad ") + what);
    return std::stoi(b_.substr(start, pos_ - start));
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw InputError("PPM: missing separator before raster");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
};

}  // namespace

Image8 decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw InputError("not a binary PPM/PGM image");
  }
  const bool grey = bytes[1] == '5';
  HeaderReader r(bytes);
  const int w = r.number("width"), h = r.number("height"), maxval = r.number("maxval");
  if (w < 1 || h < 1) throw InputError("PPM: non-positive size");
  if (maxval != 255) throw InputError("PPM: only maxval 255 is supported");
  const std::size_t start = r.raster_start();
  const int src_c = grey ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(w) * h * src_c;
  if (bytes.size() - start < need) throw InputError("PPM: truncated raster");

  Image8 img(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t px = start + (static_cast<std::size_t>(y) * w + x) * src_c;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<std::uint8_t>(bytes[px + (grey ? 0 : c)]);
    }
  }
  return img;
}

std::string encode_ppm(const Image8& img) {
  if (img.channels != 3) throw InputError("PPM output needs 3 channels");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.data.size());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(img.at(c, y, x)));
    }
  }
  return out;
}

Image8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_ppm(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_ppm(const Image8& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  const std::string bytes = encode_ppm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("cannot write image '" + path + "'");
}

}  // namespace rcnds::io
