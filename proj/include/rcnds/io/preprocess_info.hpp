#pragma once

#include <array>
#include <optional>
#include <string>

namespace rcnds::io {

/// Input pipeline a checkpoint was trained with. Stored as a comment line
/// at the top of the embedded DSL, so the checkpoint stays self-contained
/// and the DSL stays valid:
///   # preprocess mean=123.5,116.25,103.75 crop=227 source=256
struct Preprocessing {
  std::array<float, 3> mean{0, 0, 0};
  int crop = 0;
  int source_side = 0;

  bool operator==(const Preprocessing&) const = default;
};

std::string annotate_arch(const std::string& arch, const Preprocessing& p);
std::optional<Preprocessing> read_preprocessing(const std::string& arch);

}  // namespace rcnds::io
