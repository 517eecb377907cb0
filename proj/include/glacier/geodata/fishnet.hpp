#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/types.h>

namespace glacier::geodata {

/// Axis-aligned rectangle in map coordinates. Cells treat it as half-open
/// [min, max) so neighbouring cells never share a point.
struct Rect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double area() const { return width() * height(); }
    bool contains(double x, double y) const {
        return x >= min_x && x < max_x && y >= min_y && y < max_y;
    }

    bool operator==(const Rect&) const = default;
};

enum class Split { train, val, test, discarded };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct FishnetCell {
    std::string cell_id;
    Rect bounds;
    int row = 0;
    int col = 0;
    bool has_glacier = false;
    Split split = Split::discarded;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Simple (non self-intersecting) ring; closing vertex optional.
using Polygon = std::vector<Point>;

/// Maps pixel (col, row) to map coordinates: x = origin_x + col * pixel_width,
/// y = origin_y - row * pixel_height (north-up).
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_width = 1.0;
    double pixel_height = 1.0;

    /// Map extent of a raster with the given pixel dimensions.
    Rect extent(std::int64_t width, std::int64_t height) const;

    bool operator==(const GeoTransform&) const = default;
};

/// Integer pixel window [col0, col1) x [row0, row1).
struct PixelWindow {
    std::int64_t row0 = 0;
    std::int64_t col0 = 0;
    std::int64_t row1 = 0;
    std::int64_t col1 = 0;

    std::int64_t height() const { return row1 - row0; }
    std::int64_t width() const { return col1 - col0; }
};

/// Pixels whose centres fall inside the map rectangle, clipped to the raster.
PixelWindow to_pixel_window(const Rect& bounds, const GeoTransform& transform,
                            std::int64_t raster_width, std::int64_t raster_height);

/// Partitions the extent into ceil(w/cell) x ceil(h/cell) cells, row-major with
/// row 0 along max_y (matching raster row order). Cell edges are computed as
/// origin + i * cell_size, and the last row/column is clipped to the extent.
std::vector<FishnetCell> build_fishnet(const Rect& extent, double cell_size);

bool intersects(const Polygon& polygon, const Rect& rect);

/// Sets has_glacier from polygon labels.
void flag_glacier_cells(std::vector<FishnetCell>& cells, const std::vector<Polygon>& labels);

/// Sets has_glacier from a label raster: any pixel of class clean or debris in
/// the cell's pixel window.
void flag_glacier_cells(std::vector<FishnetCell>& cells, const torch::Tensor& label_raster,
                        const GeoTransform& transform);

/// Fractions for train/val/test. Nonnegative, summing to 1.
struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/// Discards glacier-free cells and assigns the rest to splits. Split sizes use
/// largest-remainder rounding of ratio * kept; membership is a seeded shuffle.
std::vector<FishnetCell> split_cells(std::vector<FishnetCell> cells, const SplitRatios& ratios,
                                     std::uint64_t seed);

std::vector<FishnetCell> filter_and_split(std::vector<FishnetCell> cells,
                                          const std::vector<Polygon>& labels,
                                          const SplitRatios& ratios, std::uint64_t seed);

/// Hex digest of (cell_id, split) pairs; identifies a split assignment.
std::string split_digest(const std::vector<FishnetCell>& cells);

}  // namespace glacier::geodata
