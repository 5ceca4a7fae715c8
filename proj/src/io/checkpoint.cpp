#include "rcnds/io/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rcnds/graph/dsl.hpp"

namespace rcnds::io {
namespace {

constexpr char kMagic[4] = {'R', 'C', 'N', 'D'};

class Writer {
 public:
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void bytes(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void tensors(const graph::ParameterSet<float>& set) {
    uint(static_cast<std::uint32_t>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      bytes(set.name(i));
      const Tensor<float>& t = set[i];
      uint(static_cast<std::uint8_t>(t.rank()));
      for (int d : t.shape().dims()) uint(static_cast<std::uint32_t>(d));
      for (float v : t.vec()) uint(std::bit_cast<std::uint32_t>(v));
    }
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <typename U>
  U uint(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(const char* what) {
    const auto n = uint<std::uint32_t>(what);
    need(n, what);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  graph::ParameterSet<float> tensors() {
    graph::ParameterSet<float> set;
    const auto count = uint<std::uint32_t>("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = bytes("tensor name");
      const auto rank = uint<std::uint8_t>("rank");
      if (rank < 1 || rank > 4) throw CheckpointError("tensor '" + name + "' has invalid rank");
      std::vector<int> dims;
      std::size_t numel = 1;
      for (int d = 0; d < rank; ++d) {
        const auto v = uint<std::uint32_t>("dims");
        if (v == 0 || v > (1u << 30)) throw CheckpointError("tensor '" + name + "' has invalid dimension");
        dims.push_back(static_cast<int>(v));
        numel *= v;
      }
      need(numel * 4, "tensor payload");
      std::vector<float> data(numel);
      for (auto& v : data) v = std::bit_cast<float>(uint<std::uint32_t>("tensor payload"));
      try {
        set.add(std::move(name), Tensor<float>(Shape(std::move(dims)), std::move(data)));
      } catch (const ConfigError& e) {
        throw CheckpointError(e.what());
      }
    }
    return set;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw CheckpointError(std::string("truncated checkpoint (") + what + ")");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.str().append(kMagic, 4);
  w.uint(c.version);
  w.bytes(c.arch);
  w.uint(static_cast<std::uint32_t>(c.epoch));
  w.uint(c.seed);
  w.tensors(c.params);
  w.uint(static_cast<std::uint8_t>(c.velocity ? 1 : 0));
  if (c.velocity) w.tensors(*c.velocity);
  w.uint(crc32_of(w.str()));
  return std::move(w.str());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  if (bytes.size() < 10) throw CheckpointError("truncated checkpoint");
  const std::string_view body(bytes.data(), bytes.size() - 4);
  Reader tail(std::string_view(bytes).substr(bytes.size() - 4));
  const auto stored_crc = tail.uint<std::uint32_t>("crc");

  Reader r(body);
  r.uint<std::uint32_t>("magic");
  Checkpoint c;
  c.version = r.uint<std::uint16_t>("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));
  }
  // Check the CRC before trusting any length field beyond the header.
  if (crc32_of(body) != stored_crc) throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated file)");
  c.arch = r.bytes("architecture");
  c.epoch = static_cast<int>(r.uint<std::uint32_t>("epoch"));
  c.seed = r.uint<std::uint64_t>("seed");
  c.params = r.tensors();
  if (r.uint<std::uint8_t>("velocity flag")) c.velocity = r.tensors();
  if (r.pos() != body.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  namespace fs = std::filesystem;
  const std::string bytes = encode_checkpoint(c);
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw CheckpointError("cannot write checkpoint '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CheckpointError("cannot move checkpoint into place at '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

graph::GraphSpec checkpoint_graph(const Checkpoint& c) {
  graph::GraphSpec g;
  try {
    g = graph::validate_residuals(graph::parse_arch(c.arch));
  } catch (const Error& e) {
    throw CheckpointError(std::string("embedded architecture is invalid: ") + e.what());
  }
  graph::select_parameters(g, c.params);
  if (graph::param_specs(g).size() != c.params.size()) {
    throw CheckpointError("checkpoint holds tensors the architecture does not use");
  }
  return g;
}

}  // namespace rcnds::io
