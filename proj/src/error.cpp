#include "dtse/error.hpp"

namespace dtse {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::DisconnectedBus: return "DisconnectedBus";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::SingularImpedance: return "SingularImpedance";
        case ErrorCode::UnknownBus: return "UnknownBus";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::InvalidLoad: return "InvalidLoad";
        case ErrorCode::UnknownChannelTarget: return "UnknownChannelTarget";
        case ErrorCode::InvalidAlpha: return "InvalidAlpha";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
        case ErrorCode::HeaderMismatch: return "HeaderMismatch";
        case ErrorCode::RaggedRows: return "RaggedRows";
        case ErrorCode::UnparseableNumber: return "UnparseableNumber";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::NotScalarLoss: return "NotScalarLoss";
        case ErrorCode::MissingGradient: return "MissingGradient";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace dtse
