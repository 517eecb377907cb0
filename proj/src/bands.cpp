#include "glacier/bands.hpp"

#include "glacier/error.hpp"

namespace glacier {

const std::array<BandSpec, kNumBands>& landsat7_bands() {
    static const std::array<BandSpec, kNumBands> bands{{
        {0, "B1", "Blue"},
        {1, "B2", "Green"},
        {2, "B3", "Red"},
        {3, "B4", "Near Infrared"},
        {4, "B5", "Shortwave Infrared 1"},
        {5, "B6_VCID_1", "Low-gain Thermal Infrared"},
        {6, "B6_VCID_2", "High-gain Thermal Infrared"},
        {7, "B7", "Shortwave Infrared 2"},
    }};
    return bands;
}

std::string class_name(int class_id) {
    switch (class_id) {
        case static_cast<int>(LabelClass::clean): return "clean";
        case static_cast<int>(LabelClass::debris): return "debris";
        default: break;
    }
    throw Error(ErrorCode::invalid_input, "class id must be 1 (clean) or 2 (debris), got " +
                                              std::to_string(class_id));
}

int class_id_from_name(const std::string& name) {
    if (name == "clean") {
        return static_cast<int>(LabelClass::clean);
    }
    if (name == "debris") {
        return static_cast<int>(LabelClass::debris);
    }
    throw Error(ErrorCode::invalid_input, "unknown class name '" + name + "'");
}

}  // namespace glacier
