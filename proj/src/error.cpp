#include "glacier/error.hpp"

namespace glacier {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_input: return "invalid input";
        case ErrorCode::empty_dataset: return "empty dataset";
        case ErrorCode::band_mismatch: return "band mismatch";
        case ErrorCode::invalid_spec: return "invalid spec";
        case ErrorCode::shape_mismatch: return "shape mismatch";
        case ErrorCode::invalid_config: return "invalid config";
        case ErrorCode::invalid_weight: return "invalid weight";
        case ErrorCode::missing_checkpoint: return "missing checkpoint";
        case ErrorCode::non_finite_loss: return "non-finite loss";
        case ErrorCode::unnormalized_input: return "unnormalized input";
        case ErrorCode::gradient_unavailable: return "gradient unavailable";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

}  // namespace glacier
