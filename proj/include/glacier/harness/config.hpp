#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "glacier/geodata/fishnet.hpp"
#include "glacier/keyvalue.hpp"
#include "glacier/losses.hpp"
#include "glacier/network/unet.hpp"

namespace glacier::harness {

struct OptimizerConfig {
    std::string kind = "adam";
    double learning_rate = 1e-4;
    int epochs = 250;
    int batch_size = 8;

    void validate() const;
};

/// Everything that determines one training run.
struct RunConfig {
    std::string class_name = "debris";
    losses::LossConfig loss;
    network::ModelConfig model;
    /// Pick depth from the tile size (4, or 3 below 128 px) instead of model.depth.
    bool auto_depth = true;
    OptimizerConfig optimizer;
    double augment_probability = 0.15;
    double threshold = 0.5;
    std::uint64_t seed = 0;
    std::string data_dir;
    std::string out_dir;
    /// Declared run-to-run tolerance on final validation IoU.
    double reproducibility_tolerance = 1e-3;

    void validate() const;
    int class_id() const;

    /// Keys: class, loss, alpha, theta, kernel, in_channels, base_features,
    /// depth (integer or "auto"), dropout, optimizer, learning_rate, epochs,
    /// batch_size, augment_probability, threshold, seed, data_dir, out_dir,
    /// reproducibility_tolerance.
    static RunConfig from_keyvalue(const KeyValueConfig& kv);
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

/// Fishnet tiling of a raster into a dataset.
struct PrepareConfig {
    /// Cell edge in map units.
    double cell_size = 256.0;
    std::int64_t tile_size = 512;
    double min_glacier_fraction = 0.10;
    geodata::SplitRatios ratios;
    std::uint64_t seed = 0;

    void validate() const;
    /// Keys: cell_size, tile_size, min_glacier_fraction, ratios (three numbers), seed.
    static PrepareConfig from_keyvalue(const KeyValueConfig& kv);
    nlohmann::json to_json() const;
};

}  // namespace glacier::harness
