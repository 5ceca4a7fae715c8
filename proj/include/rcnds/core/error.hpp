#pragma once

#include <stdexcept>
#include <string>

namespace rcnds {

enum class ErrorKind {
  kShape,
  kConfig,
  kNumeric,
  kParse,
  kWiring,
  kState,
  kInput,
  kCheckpoint,
  kManifest,
  kDiverged,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the engine. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define RCNDS_DEFINE_ERROR(Name, Kind) \
  class Name : public Error {          \
   public:                             \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

RCNDS_DEFINE_ERROR(ShapeError, kShape)
RCNDS_DEFINE_ERROR(ConfigError, kConfig)
RCNDS_DEFINE_ERROR(NumericError, kNumeric)
RCNDS_DEFINE_ERROR(WiringError, kWiring)
RCNDS_DEFINE_ERROR(StateError, kState)
RCNDS_DEFINE_ERROR(InputError, kInput)
RCNDS_DEFINE_ERROR(CheckpointError, kCheckpoint)

#undef RCNDS_DEFINE_ERROR

/// Errors tied to a line of a text document (architecture DSL, manifest).
class LineError : public Error {
 public:
  LineError(ErrorKind kind, int line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ParseError : public LineError {
 public:
  ParseError(int line, const std::string& what) : LineError(ErrorKind::kParse, line, what) {}
};

class ManifestError : public LineError {
 public:
  ManifestError(int line, const std::string& what) : LineError(ErrorKind::kManifest, line, what) {}
};

/// Non-finite training loss; carries the offending batch index.
class DivergedError : public Error {
 public:
  DivergedError(int epoch, int batch, const std::string& what)
      : Error(ErrorKind::kDiverged, "epoch " + std::to_string(epoch) + " batch " +
                                        std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace rcnds
