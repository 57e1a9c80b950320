#pragma once

#include <stdexcept>
#include <string>

namespace emt {

// Numeric values are part of the C ABI (see emtransport.h); append only.
enum class ErrorCode : int {
    Ok = 0,
    NonPositiveDefinite = 1,
    ZeroWaveVector = 2,
    ChiralityOutOfRange = 3,
    DegenerateQ = 4,
    BranchTrackingLost = 5,
    LeftDomain = 6,
    GaugeUnavailable = 7,
    UnknownChannel = 8,
    GridTooCoarse = 9,
    EmptyInput = 10,
    MixedMedia = 11,
    VanishingGroupSpeed = 12,
    DegenerateKernel = 13,
    ConfigInvalid = 14,
    EmptyHistogram = 15,
    UnderResolved = 16,
    GridMismatch = 17,
    InvalidArgument = 18,
    Io = 19,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace emt
