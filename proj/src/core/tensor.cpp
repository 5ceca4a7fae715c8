#include "rcnds/core/tensor.hpp"

#include <sstream>

namespace rcnds {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kWiring: return "wiring error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kCheckpoint: return "checkpoint error";
    case ErrorKind::kManifest: return "manifest error";
    case ErrorKind::kDiverged: return "diverged";
  }
  return "error";
}

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 4) {
    throw ShapeError("invalid shape: rank " + std::to_string(dims_.size()) + " not in [1, 4]");
  }
  for (int d : dims_) {
    if (d < 1) throw ShapeError("invalid shape: non-positive dimension in " + str());
  }
}

std::size_t Shape::numel() const {
  if (dims_.empty()) return 0;
  std::size_t n = 1;
  for (int d : dims_) n *= static_cast<std::size_t>(d);
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ')';
  return os.str();
}

}  // namespace rcnds
