#include "nnoc/error.hpp"

namespace nnoc {

const char* err_name(Err e) {
  switch (e) {
    case Err::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case Err::BitdepthUnsupported: return "BitdepthUnsupported";
    case Err::BitdepthUnderflow: return "BitdepthUnderflow";
    case Err::EmptyParent: return "EmptyParent";
    case Err::OccupancyOutsideCandidates: return "OccupancyOutsideCandidates";
    case Err::UnknownVariant: return "UnknownVariant";
    case Err::PositionNotCandidate: return "PositionNotCandidate";
    case Err::SectionMismatch: return "SectionMismatch";
    case Err::UnsupportedContextLength: return "UnsupportedContextLength";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::DegenerateProbability: return "DegenerateProbability";
    case Err::EmptyHistogram: return "EmptyHistogram";
    case Err::CorruptModelFile: return "CorruptModelFile";
    case Err::VersionMismatch: return "VersionMismatch";
    case Err::HashMismatch: return "HashMismatch";
    case Err::InvalidDistribution: return "InvalidDistribution";
    case Err::StreamExhausted: return "StreamExhausted";
    case Err::CorruptRle: return "CorruptRle";
    case Err::WrongBitdepth: return "WrongBitdepth";
    case Err::ModelVariantMismatch: return "ModelVariantMismatch";
    case Err::StreamCorrupt: return "StreamCorrupt";
    case Err::MaskInconsistent: return "MaskInconsistent";
    case Err::EmptyCloud: return "EmptyCloud";
    case Err::UnsupportedPlyVariant: return "UnsupportedPlyVariant";
    case Err::MalformedHeader: return "MalformedHeader";
    case Err::IoFailure: return "IoFailure";
    case Err::DegenerateExtent: return "DegenerateExtent";
    case Err::Internal: return "Internal";
  }
  return "Unknown";
}

ErrClass err_class(Err e) {
  switch (e) {
    case Err::CoordinateOutOfRange:
    case Err::BitdepthUnsupported:
    case Err::BitdepthUnderflow:
    case Err::EmptyParent:
    case Err::UnknownVariant:
    case Err::UnsupportedContextLength:
    case Err::EmptyHistogram:
    case Err::WrongBitdepth:
    case Err::EmptyCloud:
    case Err::UnsupportedPlyVariant:
    case Err::MalformedHeader:
    case Err::IoFailure:
    case Err::DegenerateExtent:
      return ErrClass::input;

    case Err::CorruptModelFile:
    case Err::VersionMismatch:
    case Err::HashMismatch:
    case Err::StreamExhausted:
    case Err::CorruptRle:
    case Err::ModelVariantMismatch:
    case Err::StreamCorrupt:
    case Err::MaskInconsistent:
      return ErrClass::mismatch;

    case Err::OccupancyOutsideCandidates:
    case Err::PositionNotCandidate:
    case Err::SectionMismatch:
    case Err::LengthMismatch:
    case Err::DegenerateProbability:
    case Err::InvalidDistribution:
    case Err::Internal:
      return ErrClass::internal;
  }
  return ErrClass::internal;
}

}  // namespace nnoc
