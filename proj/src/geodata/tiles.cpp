#include "glacier/geodata/tiles.hpp"

#include <cmath>
#include <cstdio>

#include <torch/torch.h>

#include "glacier/error.hpp"
#include "glacier/hash.hpp"

namespace glacier::geodata {

torch::Tensor LabelGrid::indicator(int class_id) const {
    return (classes == class_id).to(torch::kFloat32);
}

torch::Tensor LabelGrid::valid() const {
    return (classes != static_cast<int>(LabelClass::masked)).to(torch::kFloat32);
}

double LabelGrid::glacier_fraction() const {
    const auto glacier = ((classes == static_cast<int>(LabelClass::clean)) |
                          (classes == static_cast<int>(LabelClass::debris)))
                             .sum()
                             .item<std::int64_t>();
    return static_cast<double>(glacier) / static_cast<double>(classes.numel());
}

void check_label_grid(const torch::Tensor& classes) {
    require(classes.defined() && classes.dim() == 2, ErrorCode::invalid_input,
            "label grid must be a 2-D tensor");
    if (classes.numel() > 0) {
        const auto lo = classes.min().item<std::int64_t>();
        const auto hi = classes.max().item<std::int64_t>();
        require(lo >= 0 && hi < kNumLabelClasses, ErrorCode::invalid_input,
                "label values must lie in {0, 1, 2, 3}");
    }
}

std::vector<LabeledTile> tile_cell(const torch::Tensor& raster, const torch::Tensor& labels,
                                   std::int64_t tile_size, double min_glacier_fraction,
                                   const std::string& cell_id) {
    require(raster.dim() == 3, ErrorCode::invalid_input, "raster must be [C, H, W]");
    require(raster.size(0) == kNumBands, ErrorCode::band_mismatch,
            "expected " + std::to_string(kNumBands) + " bands, got " +
                std::to_string(raster.size(0)));
    check_label_grid(labels);
    require(labels.size(0) == raster.size(1) && labels.size(1) == raster.size(2),
            ErrorCode::shape_mismatch, "label grid and raster differ in spatial shape");
    require(tile_size > 0, ErrorCode::invalid_input, "tile size must be positive");
    require(min_glacier_fraction >= 0.0 && min_glacier_fraction < 1.0, ErrorCode::invalid_input,
            "min glacier fraction must lie in [0, 1)");

    const auto rows = raster.size(1) / tile_size;
    const auto cols = raster.size(2) / tile_size;
    std::vector<LabeledTile> out;
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
            const auto y0 = r * tile_size;
            const auto x0 = c * tile_size;
            LabelGrid label{labels.slice(0, y0, y0 + tile_size)
                                .slice(1, x0, x0 + tile_size)
                                .to(torch::kUInt8)
                                .contiguous()};
            if (label.glacier_fraction() < min_glacier_fraction) {
                continue;
            }
            char suffix[48];
            std::snprintf(suffix, sizeof(suffix), "_t%03lld_%03lld", static_cast<long long>(r),
                          static_cast<long long>(c));
            MultispectralTile tile;
            tile.pixels = raster.slice(1, y0, y0 + tile_size)
                              .slice(2, x0, x0 + tile_size)
                              .to(torch::kFloat32)
                              .contiguous();
            require(torch::isfinite(tile.pixels).all().item<bool>(), ErrorCode::invalid_input,
                    "raster contains non-finite values in cell " + cell_id);
            tile.cell_id = cell_id;
            tile.tile_id = cell_id + suffix;
            out.push_back(LabeledTile{std::move(tile), std::move(label)});
        }
    }
    return out;
}

std::string NormalizationStats::id() const {
    Fnv1a h;
    for (int c = 0; c < kNumBands; ++c) {
        h.update_value(mean[c]);
        h.update_value(std[c]);
    }
    h.update(computed_from);
    return "stats-" + h.hex();
}

NormalizationStats compute_normalization(const std::vector<MultispectralTile>& tiles) {
    require(!tiles.empty(), ErrorCode::empty_dataset, "normalization needs at least one tile");
    std::array<double, kNumBands> sum{};
    std::array<double, kNumBands> count{};
    for (const auto& t : tiles) {
        require(t.pixels.dim() == 3 && t.pixels.size(0) == kNumBands, ErrorCode::band_mismatch,
                "tile " + t.tile_id + " is not an 8-band [C, H, W] tensor");
        const auto px = t.pixels.to(torch::kFloat64).reshape({kNumBands, -1});
        const auto s = px.sum(1);
        for (int c = 0; c < kNumBands; ++c) {
            sum[c] += s[c].item<double>();
            count[c] += static_cast<double>(px.size(1));
        }
    }
    NormalizationStats stats;
    for (int c = 0; c < kNumBands; ++c) {
        stats.mean[c] = sum[c] / count[c];
    }
    // Second pass around the mean keeps the variance well conditioned.
    std::array<double, kNumBands> sq{};
    for (const auto& t : tiles) {
        const auto px = t.pixels.to(torch::kFloat64).reshape({kNumBands, -1});
        for (int c = 0; c < kNumBands; ++c) {
            sq[c] += (px[c] - stats.mean[c]).square().sum().item<double>();
        }
    }
    for (int c = 0; c < kNumBands; ++c) {
        stats.std[c] = std::max(std::sqrt(sq[c] / count[c]), kStdFloor);
    }
    return stats;
}

namespace {

std::pair<torch::Tensor, torch::Tensor> stat_tensors(const NormalizationStats& stats) {
    auto mean = torch::empty({kNumBands, 1, 1}, torch::kFloat64);
    auto std = torch::empty({kNumBands, 1, 1}, torch::kFloat64);
    for (int c = 0; c < kNumBands; ++c) {
        mean[c] = stats.mean[c];
        std[c] = stats.std[c];
    }
    return {mean, std};
}

}  // namespace

MultispectralTile normalize(const MultispectralTile& tile, const NormalizationStats& stats) {
    require(tile.pixels.size(0) == kNumBands, ErrorCode::band_mismatch, "tile must have 8 bands");
    require(!tile.normalized, ErrorCode::invalid_input, "tile " + tile.tile_id + " already normalized");
    auto [mean, std] = stat_tensors(stats);
    MultispectralTile out = tile;
    out.pixels = ((tile.pixels.to(torch::kFloat64) - mean) / std).to(torch::kFloat32);
    out.normalized = true;
    out.stats_id = stats.id();
    return out;
}

MultispectralTile denormalize(const MultispectralTile& tile, const NormalizationStats& stats) {
    require(tile.normalized, ErrorCode::invalid_input, "tile " + tile.tile_id + " is not normalized");
    auto [mean, std] = stat_tensors(stats);
    MultispectralTile out = tile;
    out.pixels = (tile.pixels.to(torch::kFloat64) * std + mean).to(torch::kFloat32);
    out.normalized = false;
    out.stats_id.clear();
    return out;
}

std::string to_string(Transform t) {
    switch (t) {
        case Transform::rotate90: return "rotate90";
        case Transform::rotate180: return "rotate180";
        case Transform::rotate270: return "rotate270";
        case Transform::flip_horizontal: return "flip_horizontal";
        case Transform::flip_vertical: return "flip_vertical";
    }
    return "?";
}

torch::Tensor apply_transform(const torch::Tensor& x, Transform t) {
    switch (t) {
        case Transform::rotate90: return torch::rot90(x, 1, {-2, -1}).contiguous();
        case Transform::rotate180: return torch::rot90(x, 2, {-2, -1}).contiguous();
        case Transform::rotate270: return torch::rot90(x, 3, {-2, -1}).contiguous();
        case Transform::flip_horizontal: return torch::flip(x, {-1}).contiguous();
        case Transform::flip_vertical: return torch::flip(x, {-2}).contiguous();
    }
    return x;
}

Augmented augment(const MultispectralTile& tile, const LabelGrid& label, Rng& rng,
                  double probability) {
    require(probability >= 0.0 && probability <= 1.0, ErrorCode::invalid_input,
            "augmentation probability must lie in [0, 1]");
    Augmented out{tile, label, std::nullopt};
    if (rng.uniform() >= probability) {
        return out;
    }
    const auto t = kAllTransforms[rng.index(kAllTransforms.size())];
    out.tile.pixels = apply_transform(tile.pixels, t);
    out.label.classes = apply_transform(label.classes, t);
    out.applied = t;
    return out;
}

}  // namespace glacier::geodata
