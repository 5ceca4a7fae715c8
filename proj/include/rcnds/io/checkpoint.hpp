#pragma once

// Binary checkpoint, all integers little-endian:
//
//   "RCND"  u16 version
//   u32 len, DSL text (the architecture, canonical form)
//   u32 epoch, u64 seed
//   u32 count, then per tensor: u32 len, name, u8 rank, u32 dims[rank], f32 data
//   u8 has_velocity, [u32 count, tensor records as above]
//   u32 CRC-32 of every preceding byte

#include <cstdint>
#include <optional>
#include <string>

#include "rcnds/graph/graph_spec.hpp"
#include "rcnds/graph/parameters.hpp"

namespace rcnds::io {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint16_t version = kCheckpointVersion;
  std::string arch;  // DSL text
  int epoch = 0;
  std::uint64_t seed = 0;
  graph::ParameterSet<float> params;
  std::optional<graph::ParameterSet<float>> velocity;

  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& c);
/// Throws CheckpointError on bad magic/version, truncation or CRC mismatch.
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes to a temporary file in the same directory, then renames over
/// `path`, so readers never observe a partial checkpoint.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Parses the embedded DSL and checks every graph parameter is present
/// with the right shape. Extra tensors are an error too.
graph::GraphSpec checkpoint_graph(const Checkpoint& c);

}  // namespace rcnds::io
