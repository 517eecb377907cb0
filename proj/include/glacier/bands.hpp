#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace glacier {

inline constexpr int kNumBands = 8;

struct BandSpec {
    int index;
    std::string name;
    std::string description;
};

/// Landsat 7 ETM+ band stack in channel order (thermal bands resampled to 30 m).
const std::array<BandSpec, kNumBands>& landsat7_bands();

enum class LabelClass : std::uint8_t {
    background = 0,
    clean = 1,
    debris = 2,
    masked = 3,
};

inline constexpr int kNumLabelClasses = 4;

/// "clean" or "debris"; anything else throws invalid_input.
std::string class_name(int class_id);
int class_id_from_name(const std::string& name);

}  // namespace glacier
