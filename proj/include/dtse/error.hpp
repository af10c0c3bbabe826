#pragma once

#include <stdexcept>
#include <string>

namespace dtse {

enum class ErrorCode {
    // feeder construction
    CycleDetected,
    DisconnectedBus,
    DuplicateId,
    SingularImpedance,
    UnknownBus,
    // power flow
    NoConvergence,
    InvalidLoad,
    // telemetry
    UnknownChannelTarget,
    InvalidAlpha,
    InvalidSigma,
    HeaderMismatch,
    RaggedRows,
    UnparseableNumber,
    // estimation
    RankDeficient,
    // tensors and training
    ShapeMismatch,
    NonFiniteValue,
    NotScalarLoss,
    MissingGradient,
    NonFiniteLoss,
    // reporting and plumbing
    LengthMismatch,
    InvalidArgument,
    ConfigError,
    IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string detail_;
};

/// Raised by the power-flow driver of a time series; carries the index of the step that failed.
class StepError : public Error {
  public:
    StepError(ErrorCode code, std::size_t step, const std::string& message)
        : Error(code, "step " + std::to_string(step) + ": " + message), step_(step) {}

    std::size_t step() const noexcept { return step_; }

  private:
    std::size_t step_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dtse
