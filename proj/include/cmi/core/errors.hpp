#pragma once

#include <stdexcept>
#include <string>

namespace cmi {

// Error taxonomy shared by all modules. Each failure mode the toolkit can
// report carries one of these kinds so callers (and tests) can match on the
// cause instead of parsing messages.
enum class ErrorKind {
  InsufficientData,
  UnknownRole,
  OddPool,
  ZeroNormVector,
  DegenerateFeature,
  ArchitectureMismatch,
  ArchitectureUnknown,
  DimensionMismatch,
  EmptySplit,
  UnknownAlgorithm,
  CorruptCheckpoint,
  Transport,
  ProtocolViolation,
  OverlappingSplits,
  SingleClassData,
  InconsistentConfig,
  ConfigMismatch,
  LabelOutOfRange,
  MissingLabel,
  MissingAsset,
  MissingCheckpoint,
  Validation,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace cmi
