#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mousesim {

enum class ErrorCode {
    UnknownSchema,
    EmptyLog,
    NonpositiveResolution,
    MissingFile,
    InvalidConfig,
    DegenerateSegment,
    TooFewSamples,
    NoOtherUsers,
    TooFewUsers,
    TooFewInstances,
    ShapeMismatch,
    EmptyDataset,
    NonfiniteLoss,
    CorruptModelFile,
    NoValidationData,
    IndexOutOfRange,
    UnknownUser,
    NoQuerySamples,
    InsufficientData,
    OneClassOnly,
    IoFailure,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this type; `code()` identifies the contract
// that was violated and `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mousesim
