#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "glacier/geodata/tiles.hpp"
#include "glacier/rng.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("glacier_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Uniform class codes in [0, 3] drawn from a seeded Rng.
inline glacier::geodata::LabelGrid random_labels(glacier::Rng& rng, std::int64_t h, std::int64_t w) {
    auto t = torch::empty({h, w}, torch::kUInt8);
    auto a = t.accessor<std::uint8_t, 2>();
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < w; ++c) {
            a[r][c] = static_cast<std::uint8_t>(rng.index(4));
        }
    }
    return {t};
}

inline torch::Tensor random_uniform(glacier::Rng& rng, std::initializer_list<std::int64_t> shape,
                                    torch::ScalarType dtype = torch::kFloat32) {
    auto t = torch::empty(shape, torch::kFloat64);
    auto* p = t.data_ptr<double>();
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        p[i] = rng.uniform();
    }
    return t.to(dtype);
}

inline glacier::geodata::LabeledTile random_sample(glacier::Rng& rng, std::int64_t size, const std::string& id,
                                                   bool normalized = true) {
    glacier::geodata::LabeledTile s;
    s.tile.pixels = random_uniform(rng, {8, size, size}) * 2.0 - 1.0;
    s.tile.tile_id = id;
    s.tile.cell_id = "cell_000_000";
    s.tile.normalized = normalized;
    s.label = random_labels(rng, size, size);
    return s;
}

}  // namespace testing
