#include "glacier/harness/dataset.hpp"

#include <fstream>
#include <sstream>

#include <torch/torch.h>

#include "glacier/error.hpp"

namespace glacier::harness {

namespace fs = std::filesystem;
using geodata::Split;

const std::vector<Sample>& Dataset::split(Split s) const {
    switch (s) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
        case Split::discarded: break;
    }
    throw Error(ErrorCode::invalid_input, "the discarded split holds no tiles");
}

Dataset prepare_dataset(const geodata::Raster& image, const geodata::Raster& labels, const PrepareConfig& config) {
    config.validate();
    require(image.bands() == kNumBands, ErrorCode::band_mismatch,
            "expected an 8-band raster, got " + std::to_string(image.bands()));
    require(labels.bands() == 1, ErrorCode::invalid_input, "label raster must have one band");
    require(labels.height() == image.height() && labels.width() == image.width(), ErrorCode::shape_mismatch,
            "label raster and image differ in size");

    const auto label_grid = labels.data[0].to(torch::kUInt8);
    geodata::check_label_grid(label_grid);
    const auto extent = image.transform.extent(image.width(), image.height());

    Dataset ds;
    ds.cells = geodata::build_fishnet(extent, config.cell_size);
    geodata::flag_glacier_cells(ds.cells, label_grid, image.transform);
    ds.cells = geodata::split_cells(std::move(ds.cells), config.ratios, config.seed);

    std::vector<std::pair<Split, Sample>> raw;
    for (const auto& cell : ds.cells) {
        if (cell.split == Split::discarded) {
            continue;
        }
        const auto w = geodata::to_pixel_window(cell.bounds, image.transform, image.width(), image.height());
        if (w.height() <= 0 || w.width() <= 0) {
            continue;
        }
        const auto pixels = image.data.slice(1, w.row0, w.row1).slice(2, w.col0, w.col1);
        const auto cell_labels = label_grid.slice(0, w.row0, w.row1).slice(1, w.col0, w.col1);
        for (auto& t : geodata::tile_cell(pixels, cell_labels, config.tile_size, config.min_glacier_fraction,
                                          cell.cell_id)) {
            raw.emplace_back(cell.split, std::move(t));
        }
    }

    std::vector<geodata::MultispectralTile> train_tiles;
    for (const auto& [split, s] : raw) {
        if (split == Split::train) {
            train_tiles.push_back(s.tile);
        }
    }
    require(!train_tiles.empty(), ErrorCode::empty_dataset, "no training tiles survived filtering");
    ds.stats = geodata::compute_normalization(train_tiles);
    for (auto& [split, s] : raw) {
        s.tile = geodata::normalize(s.tile, ds.stats);
        switch (split) {
            case Split::train: ds.train.push_back(std::move(s)); break;
            case Split::val: ds.val.push_back(std::move(s)); break;
            case Split::test: ds.test.push_back(std::move(s)); break;
            case Split::discarded: break;
        }
    }
    return ds;
}

Dataset synthetic_dataset(const geodata::SceneSpec& region, const PrepareConfig& config) {
    const auto scene = geodata::generate_synthetic_scene(region);
    geodata::Raster image{scene.tile.pixels, geodata::GeoTransform{0.0, static_cast<double>(region.height), 1.0, 1.0}};
    geodata::Raster labels{scene.label.classes.unsqueeze(0), image.transform};
    return prepare_dataset(image, labels, config);
}

void save_dataset(const fs::path& dir, const Dataset& dataset) {
    fs::create_directories(dir / "tiles");
    for (const auto split : {Split::train, Split::val, Split::test}) {
        for (const auto& s : dataset.split(split)) {
            geodata::write_tile(dir / "tiles", geodata::TileRecord{s.tile, s.label, split});
        }
    }
    geodata::write_normalization(dir / "normalization.json", dataset.stats);
    std::ofstream out(dir / "cells.geojson");
    require(out.good(), ErrorCode::io, "cannot write cells.geojson");
    out << geodata::fishnet_to_geojson(dataset.cells) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
    Dataset ds;
    ds.stats = geodata::read_normalization(dir / "normalization.json");
    if (fs::exists(dir / "cells.geojson")) {
        std::ifstream in(dir / "cells.geojson");
        std::stringstream buf;
        buf << in.rdbuf();
        ds.cells = geodata::fishnet_from_geojson(buf.str());
    }
    for (auto& rec : geodata::read_tile_directory(dir / "tiles")) {
        require(rec.tile.normalized && rec.tile.stats_id == ds.stats.id(), ErrorCode::invalid_input,
                "tile " + rec.tile.tile_id + " was not normalized with this dataset's statistics");
        Sample s{std::move(rec.tile), std::move(rec.label)};
        switch (rec.split) {
            case Split::train: ds.train.push_back(std::move(s)); break;
            case Split::val: ds.val.push_back(std::move(s)); break;
            case Split::test: ds.test.push_back(std::move(s)); break;
            case Split::discarded: break;
        }
    }
    return ds;
}

std::array<double, kNumLabelClasses> label_distribution(const std::vector<Sample>& samples) {
    std::array<double, kNumLabelClasses> counts{};
    double total = 0.0;
    for (const auto& s : samples) {
        const auto f = geodata::class_fractions(s.label);
        const auto n = static_cast<double>(s.label.classes.numel());
        for (int k = 0; k < kNumLabelClasses; ++k) {
            counts[k] += f[k] * n;
        }
        total += n;
    }
    if (total > 0.0) {
        for (auto& c : counts) {
            c /= total;
        }
    }
    return counts;
}

}  // namespace glacier::harness
