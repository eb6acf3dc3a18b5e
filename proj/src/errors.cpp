#include "mmdpcn/errors.hpp"

namespace mmdpcn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ZeroColumn: return "ZeroColumn";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyVector: return "EmptyVector";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mmdpcn
