#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "glacier/bands.hpp"
#include "glacier/geodata/tiles.hpp"

namespace glacier::geodata {

/// Target share of each label class over the whole scene.
struct ClassFractions {
    double background = 0.72;
    double clean = 0.22;
    double debris = 0.025;
    double masked = 0.035;
};

/// Parameters of a synthetic multispectral scene.
///
/// Clean ice carries an additive spectral offset in the channels listed in
/// clean_signature. Debris keeps the background spectrum on average and
/// differs only by a zero-mean high-frequency texture in debris_texture
/// channels, and it always grows as lobes attached to clean ice. Masked pixels
/// form a band along the left edge.
struct SceneSpec {
    std::int64_t height = 64;
    std::int64_t width = 64;
    ClassFractions fractions;
    std::map<int, double> clean_signature{{4, 3.0}, {7, 3.0}};
    std::map<int, double> debris_texture{{2, 1.5}, {3, 1.5}, {4, 1.5}};
    std::array<double, kNumBands> background{0.12, 0.11, 0.10, 0.22, 0.18, 0.30, 0.31, 0.14};
    double noise = 0.5;
    /// Width in pixels; derived from fractions.masked when unset.
    std::optional<std::int64_t> mask_band_width;
    /// Typical clean-ice blob radius in pixels; 0 selects 15 % of the short side.
    double feature_scale = 0.0;
    std::uint64_t seed = 0;
};

/// Throws invalid_spec for bad sizes, channels, or fractions summing above 1.
void validate(const SceneSpec& spec);

/// Parses the plain-text `key = value` scene format (see README).
SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::string& path);
std::string format_scene_spec(const SceneSpec& spec);

struct SyntheticScene {
    MultispectralTile tile;
    LabelGrid label;
};

SyntheticScene generate_synthetic_scene(const SceneSpec& spec);
inline SyntheticScene generate_synthetic_scene(SceneSpec spec, std::uint64_t seed) {
    spec.seed = seed;
    return generate_synthetic_scene(spec);
}

/// Achieved share of each class, indexed by LabelClass.
std::array<double, kNumLabelClasses> class_fractions(const LabelGrid& label);

}  // namespace glacier::geodata
