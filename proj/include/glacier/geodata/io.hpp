#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/types.h>

#include "glacier/geodata/fishnet.hpp"
#include "glacier/geodata/tiles.hpp"

namespace glacier::geodata {

/// Band-sequential raster with its georeferencing.
struct Raster {
    torch::Tensor data;  // [bands, H, W]
    GeoTransform transform;

    std::int64_t bands() const { return data.size(0); }
    std::int64_t height() const { return data.size(1); }
    std::int64_t width() const { return data.size(2); }
};

/// Reads a (Geo)TIFF with any number of samples per pixel, chunky or planar,
/// 8/16/32-bit integer or 32/64-bit float samples. ModelPixelScale and
/// ModelTiepoint tags set the transform when present; otherwise pixel
/// coordinates are used (origin (0, H), unit pixels). Data comes back as float32.
Raster read_geotiff(const std::filesystem::path& path);

/// Writes a planar float32 (or uint8, for label rasters) GeoTIFF carrying the
/// transform as ModelPixelScale and ModelTiepoint tags.
void write_geotiff(const std::filesystem::path& path, const Raster& raster);

/// Sidecar fields stored next to each tile's flat binary tensor.
struct TileRecord {
    MultispectralTile tile;
    LabelGrid label;
    Split split = Split::train;
};

/// Writes <dir>/<tile_id>.bin (float32 C-order [C, H, W], little endian),
/// <dir>/<tile_id>.labels.bin (uint8 [H, W]) and <dir>/<tile_id>.json.
void write_tile(const std::filesystem::path& dir, const TileRecord& record);
TileRecord read_tile(const std::filesystem::path& sidecar);

/// All tiles in a directory, sorted by tile id.
std::vector<TileRecord> read_tile_directory(const std::filesystem::path& dir);

void write_normalization(const std::filesystem::path& path, const NormalizationStats& stats);
NormalizationStats read_normalization(const std::filesystem::path& path);

/// FeatureCollection of polygons with properties {cell_id, split, has_glacier}.
std::string fishnet_to_geojson(const std::vector<FishnetCell>& cells);
std::vector<FishnetCell> fishnet_from_geojson(const std::string& text);

}  // namespace glacier::geodata
