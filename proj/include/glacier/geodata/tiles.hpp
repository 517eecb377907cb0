#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/types.h>

#include "glacier/bands.hpp"
#include "glacier/rng.hpp"

namespace glacier::geodata {

/// 8-channel raster window, float32 [C, H, W].
struct MultispectralTile {
    torch::Tensor pixels;
    std::string tile_id;
    std::string cell_id;
    bool normalized = false;
    std::string stats_id;

    std::int64_t channels() const { return pixels.size(0); }
    std::int64_t height() const { return pixels.size(1); }
    std::int64_t width() const { return pixels.size(2); }
};

/// Per-pixel class, uint8 [H, W] with values in {0, 1, 2, 3} (see LabelClass).
struct LabelGrid {
    torch::Tensor classes;

    std::int64_t height() const { return classes.size(0); }
    std::int64_t width() const { return classes.size(1); }

    /// 1 where the pixel is class_id, as float32.
    torch::Tensor indicator(int class_id) const;
    /// 1 where the pixel is not masked, as float32.
    torch::Tensor valid() const;
    /// Fraction of all pixels labelled clean or debris.
    double glacier_fraction() const;
};

struct LabeledTile {
    MultispectralTile tile;
    LabelGrid label;
};

/// Validates a label tensor: 2-D, uint8-convertible, values in [0, 3].
void check_label_grid(const torch::Tensor& classes);

/// Cuts a cell raster into non-overlapping tile_size x tile_size tiles from the
/// top-left corner, dropping partial edge tiles, and keeps tiles whose glacier
/// fraction (clean + debris over all pixels) is at least min_glacier_fraction.
std::vector<LabeledTile> tile_cell(const torch::Tensor& raster, const torch::Tensor& labels,
                                   std::int64_t tile_size, double min_glacier_fraction,
                                   const std::string& cell_id);

struct NormalizationStats {
    std::array<double, kNumBands> mean{};
    std::array<double, kNumBands> std{};
    std::string computed_from = "train";

    /// Stable digest of the statistics, stored in tile sidecars and checkpoints.
    std::string id() const;
};

inline constexpr double kStdFloor = 1e-6;

/// Population mean/std per channel over every pixel of every tile.
NormalizationStats compute_normalization(const std::vector<MultispectralTile>& tiles);

MultispectralTile normalize(const MultispectralTile& tile, const NormalizationStats& stats);
MultispectralTile denormalize(const MultispectralTile& tile, const NormalizationStats& stats);

enum class Transform { rotate90, rotate180, rotate270, flip_horizontal, flip_vertical };

inline constexpr std::array<Transform, 5> kAllTransforms{
    Transform::rotate90, Transform::rotate180, Transform::rotate270, Transform::flip_horizontal,
    Transform::flip_vertical};

std::string to_string(Transform t);

/// Applies the transform to the last two (spatial) dimensions.
torch::Tensor apply_transform(const torch::Tensor& x, Transform t);

struct Augmented {
    MultispectralTile tile;
    LabelGrid label;
    std::optional<Transform> applied;
};

/// With the given probability applies one of the five transforms, drawn
/// uniformly, to tile and label alike.
Augmented augment(const MultispectralTile& tile, const LabelGrid& label, Rng& rng,
                  double probability = 0.15);

}  // namespace glacier::geodata
