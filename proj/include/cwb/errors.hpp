#pragma once

#include <stdexcept>
#include <string>

namespace cwb {

/// Base class for all workbench errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ChartMismatch : Error { using Error::Error; };
struct RankMismatch : Error { using Error::Error; };
struct NotClosed : Error { using Error::Error; };
struct MissingMetric : Error { using Error::Error; };
struct NotAntisymmetric : Error { using Error::Error; };
struct NotFlat : Error { using Error::Error; };
struct NotInvertible : Error { using Error::Error; };
struct NotExact : Error { using Error::Error; };
struct RankJump : Error { using Error::Error; };
struct BandLimitExceeded : Error { using Error::Error; };
struct DimensionJump : Error { using Error::Error; };
struct NoSpectralGap : Error { using Error::Error; };
struct AugmentationFailed : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace cwb
