#pragma once

#include <stdexcept>
#include <string>

namespace nnoc {

// Failure classes map 1:1 onto CLI exit codes (see tools/nnoc.cpp):
//   input    -> 3  bad or unusable input data
//   mismatch -> 4  stream/model disagreement or corruption
//   internal -> 5  broken invariant inside the library
enum class ErrClass { input = 3, mismatch = 4, internal = 5 };

enum class Err {
  // geometry
  CoordinateOutOfRange,
  BitdepthUnsupported,
  BitdepthUnderflow,
  EmptyParent,
  OccupancyOutsideCandidates,
  // context
  UnknownVariant,
  PositionNotCandidate,
  SectionMismatch,
  // model
  UnsupportedContextLength,
  LengthMismatch,
  DegenerateProbability,
  EmptyHistogram,
  CorruptModelFile,
  VersionMismatch,
  HashMismatch,
  // entropy
  InvalidDistribution,
  StreamExhausted,
  CorruptRle,
  // codec
  WrongBitdepth,
  ModelVariantMismatch,
  StreamCorrupt,
  MaskInconsistent,
  EmptyCloud,
  // io
  UnsupportedPlyVariant,
  MalformedHeader,
  IoFailure,
  DegenerateExtent,
  // anything else
  Internal,
};

const char* err_name(Err e);
ErrClass err_class(Err e);

class Error : public std::runtime_error {
public:
  Error(Err kind, const std::string& msg)
      : std::runtime_error(std::string(err_name(kind)) + ": " + msg), kind_(kind) {}

  Err kind() const { return kind_; }
  ErrClass cls() const { return err_class(kind_); }

private:
  Err kind_;
};

[[noreturn]] inline void fail(Err kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace nnoc
