#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "glacier/geodata/fishnet.hpp"
#include "glacier/geodata/io.hpp"
#include "glacier/geodata/synthetic.hpp"
#include "glacier/geodata/tiles.hpp"
#include "glacier/harness/config.hpp"

namespace glacier::harness {

using Sample = geodata::LabeledTile;

/// Normalized tiles grouped by split, with the cells they came from.
struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
    geodata::NormalizationStats stats;
    std::vector<geodata::FishnetCell> cells;

    const std::vector<Sample>& split(geodata::Split s) const;
    std::string split_digest() const { return geodata::split_digest(cells); }
};

/// Fishnet over the raster extent, glacier-cell filtering, seeded split,
/// per-cell tiling with the glacier-fraction filter, and z-scoring with
/// statistics from the training tiles only.
Dataset prepare_dataset(const geodata::Raster& image, const geodata::Raster& labels, const PrepareConfig& config);

/// Generates one region-sized synthetic scene (pixel map units) and prepares it.
Dataset synthetic_dataset(const geodata::SceneSpec& region, const PrepareConfig& config);

/// Layout: <dir>/tiles/*.{bin,labels.bin,json}, <dir>/normalization.json,
/// <dir>/cells.geojson.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

/// Per-class pixel shares over a set of samples, indexed by LabelClass.
std::array<double, kNumLabelClasses> label_distribution(const std::vector<Sample>& samples);

}  // namespace glacier::harness
