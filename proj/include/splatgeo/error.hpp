#pragma once

#include <stdexcept>
#include <string>

namespace splatgeo {

enum class ErrorCode {
    MalformedHeader,
    NonfiniteField,
    InvalidScale,
    EmptyScene,
    IoFailure,
    ShapeMismatch,
    NonfinitePart,
    NonfiniteGradient,
    Diverged,
    EmptyIsosurface,
    EmptyMesh,
    InvalidSpec,
    InvalidConfig,
    InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

// All recoverable failures in the toolkit are reported through this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace splatgeo
