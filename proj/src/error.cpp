#include "splatgeo/error.hpp"

namespace splatgeo {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::NonfiniteField: return "nonfinite-field";
    case ErrorCode::InvalidScale: return "invalid-scale";
    case ErrorCode::EmptyScene: return "empty-scene";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::NonfinitePart: return "nonfinite-part";
    case ErrorCode::NonfiniteGradient: return "nonfinite-gradient";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::EmptyIsosurface: return "empty-isosurface";
    case ErrorCode::EmptyMesh: return "empty-mesh";
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    }
    return "unknown";
}

} // namespace splatgeo
