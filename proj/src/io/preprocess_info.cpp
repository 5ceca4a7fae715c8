#include "rcnds/io/preprocess_info.hpp"

#include <cstdio>
#include <sstream>

namespace rcnds::io {

namespace {
constexpr const char* kTag = "# preprocess ";
}

std::string annotate_arch(const std::string& arch, const Preprocessing& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%smean=%.9g,%.9g,%.9g crop=%d source=%d\n", kTag, p.mean[0], p.mean[1], p.mean[2],
                p.crop, p.source_side);
  return buf + arch;
}

std::optional<Preprocessing> read_preprocessing(const std::string& arch) {
  std::istringstream in(arch);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(kTag, 0) != 0) continue;
    Preprocessing p;
    if (std::sscanf(line.c_str() + std::char_traits<char>::length(kTag), "mean=%f,%f,%f crop=%d source=%d", &p.mean[0],
                    &p.mean[1], &p.mean[2], &p.crop, &p.source_side) == 5) {
      return p;
    }
  }
  return std::nullopt;
}

}  // namespace rcnds::io
