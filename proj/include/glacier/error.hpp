#pragma once

#include <stdexcept>
#include <string>

namespace glacier {

enum class ErrorCode {
    invalid_input,
    empty_dataset,
    band_mismatch,
    invalid_spec,
    shape_mismatch,
    invalid_config,
    invalid_weight,
    missing_checkpoint,
    non_finite_loss,
    unnormalized_input,
    gradient_unavailable,
    io,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        throw Error(code, message);
    }
}

}  // namespace glacier
