#pragma once

#include <stdexcept>
#include <string>

namespace r3s2 {

/// Base class of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AngleOutOfBranch : Error { using Error::Error; };
struct ChartSingularity : Error { using Error::Error; };
struct OrderTooLarge : Error { using Error::Error; };
struct NonSPD : Error { using Error::Error; };
struct NegativeInput : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct UnstableStep : Error { using Error::Error; };
struct AllZeroCoefficients : Error { using Error::Error; };
struct WindowTooSmall : Error { using Error::Error; };
struct CurvatureBlowup : Error { using Error::Error; };
struct ZeroSpatialVelocity : Error { using Error::Error; };

}  // namespace r3s2
