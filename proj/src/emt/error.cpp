#include "emt/error.hpp"

namespace emt {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Ok: return "Ok";
        case ErrorCode::NonPositiveDefinite: return "NonPositiveDefinite";
        case ErrorCode::ZeroWaveVector: return "ZeroWaveVector";
        case ErrorCode::ChiralityOutOfRange: return "ChiralityOutOfRange";
        case ErrorCode::DegenerateQ: return "DegenerateQ";
        case ErrorCode::BranchTrackingLost: return "BranchTrackingLost";
        case ErrorCode::LeftDomain: return "LeftDomain";
        case ErrorCode::GaugeUnavailable: return "GaugeUnavailable";
        case ErrorCode::UnknownChannel: return "UnknownChannel";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::MixedMedia: return "MixedMedia";
        case ErrorCode::VanishingGroupSpeed: return "VanishingGroupSpeed";
        case ErrorCode::DegenerateKernel: return "DegenerateKernel";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::EmptyHistogram: return "EmptyHistogram";
        case ErrorCode::UnderResolved: return "UnderResolved";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace emt
