#include "glacier/saliency.hpp"

#include <algorithm>
#include <numeric>

#include "glacier/bands.hpp"
#include "glacier/error.hpp"

namespace glacier::saliency {

LogitFn inference_logits(network::UNet model) {
    return [model](const torch::Tensor& x) mutable {
        model->eval();
        network::check_input_shape(model->config(), x);
        return model->forward(x);
    };
}

SaliencyMap saliency_map(const LogitFn& model, const geodata::MultispectralTile& tile,
                         const std::string& class_name) {
    require(tile.pixels.dim() == 3, ErrorCode::shape_mismatch, "saliency expects a [C, H, W] tile");
    auto input = tile.pixels.to(torch::kFloat32).unsqueeze(0).detach().clone().requires_grad_(true);
    const auto logits = model(input);
    require(logits.defined() && logits.requires_grad(), ErrorCode::gradient_unavailable,
            "model output is not differentiable with respect to the input");
    const auto grads = torch::autograd::grad({logits.sum()}, {input}, {}, /*retain_graph=*/false,
                                             /*create_graph=*/false, /*allow_unused=*/true);
    SaliencyMap map;
    map.tile_id = tile.tile_id;
    map.class_name = class_name;
    map.values = grads[0].defined() ? grads[0].squeeze(0).abs().detach()
                                    : torch::zeros_like(tile.pixels, torch::kFloat32);
    return map;
}

std::vector<double> saliency_score(const SaliencyMap& map) {
    const auto sums = map.values.to(torch::kFloat64).sum({1, 2});
    std::vector<double> out(static_cast<std::size_t>(sums.size(0)));
    for (std::int64_t c = 0; c < sums.size(0); ++c) {
        out[static_cast<std::size_t>(c)] = sums[c].item<double>();
    }
    return out;
}

std::vector<int> rank_channels(std::span<const double> scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    return order;
}

SaliencyReport average_report(const LogitFn& model, std::span<const geodata::MultispectralTile> tiles,
                              bool normalize, const std::string& class_name) {
    require(!tiles.empty(), ErrorCode::empty_dataset, "saliency report needs at least one tile");
    std::vector<double> mean;
    for (const auto& tile : tiles) {
        auto scores = saliency_score(saliency_map(model, tile, class_name));
        if (normalize) {
            const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
            if (total > 0.0) {
                for (auto& s : scores) {
                    s /= total;
                }
            }
        }
        if (mean.empty()) {
            mean.assign(scores.size(), 0.0);
        }
        require(scores.size() == mean.size(), ErrorCode::band_mismatch, "tiles differ in channel count");
        for (std::size_t c = 0; c < scores.size(); ++c) {
            mean[c] += scores[c];
        }
    }
    for (auto& m : mean) {
        m /= static_cast<double>(tiles.size());
    }

    SaliencyReport report;
    report.per_channel_scores = mean;
    report.ranking_indices = rank_channels(mean);
    const auto& bands = landsat7_bands();
    for (int idx : report.ranking_indices) {
        report.ranking.push_back(idx < kNumBands ? bands[static_cast<std::size_t>(idx)].name
                                                 : "ch" + std::to_string(idx));
    }
    report.n_samples = static_cast<std::int64_t>(tiles.size());
    report.class_name = class_name;
    report.normalized = normalize;
    return report;
}

nlohmann::json to_json(const SaliencyReport& report) {
    nlohmann::json bands = nlohmann::json::array();
    const auto& specs = landsat7_bands();
    for (std::size_t c = 0; c < report.per_channel_scores.size(); ++c) {
        bands.push_back({{"index", c},
                         {"name", c < specs.size() ? specs[c].name : "ch" + std::to_string(c)},
                         {"score", report.per_channel_scores[c]}});
    }
    return {{"class", report.class_name},
            {"n_samples", report.n_samples},
            {"normalized", report.normalized},
            {"per_channel_scores", report.per_channel_scores},
            {"bands", bands},
            {"ranking", report.ranking},
            {"ranking_indices", report.ranking_indices}};
}

}  // namespace glacier::saliency
