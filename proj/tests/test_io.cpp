#include "catch.hpp"

#include <fstream>

#include <json.hpp>

#include "glacier/error.hpp"
#include "glacier/geodata/io.hpp"
#include "support.hpp"

using namespace glacier;
using namespace glacier::geodata;

TEST_CASE("geotiff round trip keeps values and georeferencing") {
    const auto dir = testing::temp_dir("geotiff");
    Rng rng(1);
    Raster image{testing::random_uniform(rng, {8, 33, 21}) * 1000.0 - 50.0, {500000.0, 3100000.0, 30.0, 30.0}};
    write_geotiff(dir / "image.tif", image);
    const auto back = read_geotiff(dir / "image.tif");
    CHECK(back.transform == image.transform);
    CHECK(back.data.scalar_type() == torch::kFloat32);
    CHECK(torch::equal(back.data, image.data));

    Raster labels{testing::random_labels(rng, 33, 21).classes.unsqueeze(0), image.transform};
    write_geotiff(dir / "labels.tif", labels);
    const auto lb = read_geotiff(dir / "labels.tif");
    REQUIRE(lb.bands() == 1);
    CHECK(torch::equal(lb.data.to(torch::kUInt8), labels.data));
}

TEST_CASE("reading a missing tiff is an io error") {
    CHECK_THROWS_MATCHES(read_geotiff("/nonexistent/x.tif"), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::io;
                         }));
}

TEST_CASE("tile records round trip bitwise with a documented sidecar") {
    const auto dir = testing::temp_dir("tiles");
    Rng rng(2);
    TileRecord rec;
    {
        auto s = testing::random_sample(rng, 16, "cell_001_002_t000_001");
        rec.tile = s.tile;
        rec.label = s.label;
    }
    rec.tile.cell_id = "cell_001_002";
    rec.tile.stats_id = "stats-abc";
    rec.split = Split::val;
    write_tile(dir, rec);
    const auto back = read_tile(dir / "cell_001_002_t000_001.json");
    CHECK(torch::equal(back.tile.pixels, rec.tile.pixels));
    CHECK(torch::equal(back.label.classes, rec.label.classes));
    CHECK(back.tile.tile_id == rec.tile.tile_id);
    CHECK(back.tile.cell_id == "cell_001_002");
    CHECK(back.tile.normalized);
    CHECK(back.tile.stats_id == "stats-abc");
    CHECK(back.split == Split::val);

    std::ifstream in(dir / "cell_001_002_t000_001.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("shape") == nlohmann::json({8, 16, 16}));
    CHECK(j.at("dtype") == "float32");
    CHECK(j.at("byte_order") == "little");
    CHECK(j.at("channel_order").size() == 8);
    CHECK(std::filesystem::file_size(dir / "cell_001_002_t000_001.bin") == 8 * 16 * 16 * 4);
    CHECK(std::filesystem::file_size(dir / "cell_001_002_t000_001.labels.bin") == 16 * 16);
}

TEST_CASE("tile directory listing is sorted and detects truncation") {
    const auto dir = testing::temp_dir("tiledir");
    Rng rng(3);
    for (const char* id : {"b", "c", "a"}) {
        TileRecord rec;
        auto s = testing::random_sample(rng, 8, id);
        rec.tile = s.tile;
        rec.label = s.label;
        write_tile(dir, rec);
    }
    const auto all = read_tile_directory(dir);
    REQUIRE(all.size() == 3);
    CHECK(all[0].tile.tile_id == "a");
    CHECK(all[2].tile.tile_id == "c");
    std::filesystem::resize_file(dir / "b.bin", 100);
    CHECK_THROWS_AS(read_tile(dir / "b.json"), Error);
}

TEST_CASE("normalization stats round trip") {
    const auto dir = testing::temp_dir("stats");
    NormalizationStats s;
    for (int i = 0; i < 8; ++i) {
        s.mean[i] = 0.1 * i + 1.0 / 3.0;
        s.std[i] = 1.0 + i / 7.0;
    }
    write_normalization(dir / "n.json", s);
    const auto back = read_normalization(dir / "n.json");
    CHECK(back.mean == s.mean);
    CHECK(back.std == s.std);
    CHECK(back.id() == s.id());
}

TEST_CASE("fishnet geojson round trip") {
    auto cells = build_fishnet({0, 0, 30, 20}, 10);
    cells[1].has_glacier = true;
    cells[1].split = Split::test;
    const auto back = fishnet_from_geojson(fishnet_to_geojson(cells));
    REQUIRE(back.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(back[i].cell_id == cells[i].cell_id);
        CHECK(back[i].bounds == cells[i].bounds);
        CHECK(back[i].has_glacier == cells[i].has_glacier);
        CHECK(back[i].split == cells[i].split);
        CHECK(back[i].row == cells[i].row);
        CHECK(back[i].col == cells[i].col);
    }
    const auto j = nlohmann::json::parse(fishnet_to_geojson(cells));
    CHECK(j.at("type") == "FeatureCollection");
}
