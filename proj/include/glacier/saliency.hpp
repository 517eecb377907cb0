#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "glacier/geodata/tiles.hpp"
#include "glacier/network/unet.hpp"

namespace glacier::saliency {

/// Any differentiable per-pixel model: [N, C, H, W] -> logits [N, H, W].
using LogitFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// Wraps a U-Net in inference mode (dropout off, batch-norm running stats).
LogitFn inference_logits(network::UNet model);

struct SaliencyMap {
    torch::Tensor values;  // [C, r, c], nonnegative
    std::string tile_id;
    std::string class_name;
};

/// |d(sum of output logits) / d(input)| for one [C, H, W] tile. Throws
/// gradient_unavailable if the logits are not connected to the input.
SaliencyMap saliency_map(const LogitFn& model, const geodata::MultispectralTile& tile,
                         const std::string& class_name = "");

/// Per channel, the sum of the channel's map over all rows and columns.
std::vector<double> saliency_score(const SaliencyMap& map);

struct SaliencyReport {
    std::vector<double> per_channel_scores;
    /// Channel indices by descending score, ties by index.
    std::vector<int> ranking_indices;
    /// Band names in ranking order.
    std::vector<std::string> ranking;
    std::int64_t n_samples = 0;
    std::string class_name;
    bool normalized = true;
};

/// Descending order, ties broken by lower index.
std::vector<int> rank_channels(std::span<const double> scores);

/// Scores every tile, optionally L1-normalizes each tile's vector, and
/// averages over tiles.
SaliencyReport average_report(const LogitFn& model, std::span<const geodata::MultispectralTile> tiles,
                              bool normalize = true, const std::string& class_name = "");

nlohmann::json to_json(const SaliencyReport& report);

}  // namespace glacier::saliency
