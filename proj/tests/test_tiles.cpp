#include "catch.hpp"

#include <array>
#include <map>

#include "glacier/error.hpp"
#include "glacier/geodata/tiles.hpp"
#include "glacier/rng.hpp"
#include "support.hpp"

using namespace glacier;
using namespace glacier::geodata;

namespace {

// 10x10 label raster with `glacier` pixels set to clean in row-major order.
torch::Tensor labels_with(int glacier) {
    auto t = torch::zeros({100}, torch::kUInt8);
    t.slice(0, 0, glacier).fill_(1);
    return t.reshape({10, 10});
}

torch::Tensor raster(std::int64_t h, std::int64_t w, std::int64_t bands = 8) {
    return torch::arange(bands * h * w, torch::kFloat32).reshape({bands, h, w});
}

}  // namespace

TEST_CASE("glacier-fraction filter keeps tiles at or above the threshold") {
    CHECK(tile_cell(raster(10, 10), labels_with(0), 10, 0.10, "c").empty());
    CHECK(tile_cell(raster(10, 10), labels_with(50), 10, 0.10, "c").size() == 1);
    CHECK(tile_cell(raster(10, 10), labels_with(9), 10, 0.10, "c").empty());
    CHECK(tile_cell(raster(10, 10), labels_with(10), 10, 0.10, "c").size() == 1);
}

TEST_CASE("debris counts as glacier and masked does not") {
    auto labels = torch::full({10, 10}, 3, torch::kUInt8);
    CHECK(tile_cell(raster(10, 10), labels, 10, 0.10, "c").empty());
    labels.slice(0, 0, 2).fill_(2);
    CHECK(tile_cell(raster(10, 10), labels, 10, 0.10, "c").size() == 1);
}

TEST_CASE("tiles are non-overlapping, drop partial edges and carry ids") {
    const auto img = raster(25, 37);
    const auto labels = torch::ones({25, 37}, torch::kUInt8);
    const auto tiles = tile_cell(img, labels, 12, 0.0, "cell_001_002");
    REQUIRE(tiles.size() == 6);  // 2 rows x 3 cols
    CHECK(tiles[0].tile.tile_id == "cell_001_002_t000_000");
    CHECK(tiles[5].tile.tile_id == "cell_001_002_t001_002");
    CHECK(tiles[4].tile.cell_id == "cell_001_002");
    CHECK(torch::equal(tiles[4].tile.pixels, img.slice(1, 12, 24).slice(2, 12, 24)));
    CHECK(tiles[4].tile.pixels.sizes() == torch::IntArrayRef({8, 12, 12}));
    CHECK_FALSE(tiles[0].tile.normalized);
}

TEST_CASE("tiling errors") {
    const auto bad_bands = [] { tile_cell(raster(10, 10, 7), labels_with(50), 10, 0.1, "c"); };
    CHECK_THROWS_MATCHES(bad_bands(), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::band_mismatch;
                         }));
    auto nan = raster(10, 10);
    nan.index_put_({0, 0, 0}, std::nanf(""));
    CHECK_THROWS_AS(tile_cell(nan, labels_with(50), 10, 0.1, "c"), Error);
    CHECK_THROWS_AS(check_label_grid(torch::full({2, 2}, 4, torch::kUInt8)), Error);
}

TEST_CASE("normalization statistics") {
    SECTION("constant channel gets the std floor") {
        MultispectralTile t;
        t.pixels = torch::zeros({8, 4, 4});
        const auto s = compute_normalization({t});
        for (int c = 0; c < 8; ++c) {
            CHECK(s.mean[c] == 0.0);
            CHECK(s.std[c] == kStdFloor);
        }
    }
    SECTION("two pixels 0 and 2 give mean 1 and std 1") {
        MultispectralTile t;
        t.pixels = torch::zeros({8, 1, 2});
        t.pixels.select(2, 1).fill_(2.0);
        const auto s = compute_normalization({t});
        for (int c = 0; c < 8; ++c) {
            CHECK(s.mean[c] == 1.0);
            CHECK(s.std[c] == 1.0);
        }
    }
    SECTION("pooled over tiles rather than averaged per tile") {
        MultispectralTile a, b;
        a.pixels = torch::zeros({8, 1, 3});
        b.pixels = torch::full({8, 1, 1}, 4.0);
        const auto s = compute_normalization({a, b});
        CHECK(s.mean[0] == 1.0);
        CHECK(s.std[0] == Catch::Approx(std::sqrt(3.0)));
    }
    CHECK_THROWS_AS(compute_normalization({}), Error);
}

TEST_CASE("normalize and denormalize round trip") {
    Rng rng(5);
    auto sample = testing::random_sample(rng, 16, "t", false);
    sample.tile.pixels = sample.tile.pixels * 3.0 + 7.0;
    const auto stats = compute_normalization({sample.tile});
    const auto z = normalize(sample.tile, stats);
    CHECK(z.normalized);
    CHECK(z.stats_id == stats.id());
    const auto mean = z.pixels.mean({1, 2});
    const auto sd = z.pixels.std({1, 2}, /*unbiased=*/false);
    CHECK(mean.abs().max().item<double>() < 1e-5);
    CHECK((sd - 1.0).abs().max().item<double>() < 1e-4);
    const auto back = denormalize(z, stats);
    CHECK_FALSE(back.normalized);
    CHECK(torch::allclose(back.pixels, sample.tile.pixels, 1e-5, 1e-4));
    CHECK_THROWS_AS(normalize(z, stats), Error);
}

TEST_CASE("stats id depends on values") {
    NormalizationStats a, b;
    a.std.fill(1.0);
    b.std.fill(1.0);
    CHECK(a.id() == b.id());
    b.mean[3] = 0.5;
    CHECK(a.id() != b.id());
}

TEST_CASE("transform group properties") {
    const auto x = torch::arange(2 * 5 * 5, torch::kFloat32).reshape({2, 5, 5});
    auto y = x;
    for (int i = 0; i < 4; ++i) y = apply_transform(y, Transform::rotate90);
    CHECK(torch::equal(y, x));
    CHECK(torch::equal(apply_transform(apply_transform(x, Transform::flip_horizontal), Transform::flip_horizontal), x));
    CHECK(torch::equal(apply_transform(apply_transform(x, Transform::flip_vertical), Transform::flip_vertical), x));
    CHECK(torch::equal(apply_transform(apply_transform(x, Transform::rotate90), Transform::rotate270), x));
    CHECK(torch::equal(apply_transform(apply_transform(x, Transform::rotate90), Transform::rotate90),
                       apply_transform(x, Transform::rotate180)));
    // rotate180 == both flips
    CHECK(torch::equal(apply_transform(x, Transform::rotate180),
                       apply_transform(apply_transform(x, Transform::flip_vertical), Transform::flip_horizontal)));
    // Horizontal flip mirrors columns.
    CHECK(apply_transform(x, Transform::flip_horizontal).index({0, 0, 0}).item<float>() == 4.0f);
}

TEST_CASE("augmentation moves tile and label together") {
    Rng rng(1);
    auto sample = testing::random_sample(rng, 8, "t");
    // Channel 0 encodes the label so any mismatch would be visible.
    sample.tile.pixels.select(0, 0).copy_(sample.label.classes.to(torch::kFloat32));
    Rng aug(2);
    int applied = 0;
    for (int i = 0; i < 200; ++i) {
        const auto out = augment(sample.tile, sample.label, aug, 1.0);
        REQUIRE(out.applied.has_value());
        ++applied;
        CHECK(torch::equal(out.tile.pixels.select(0, 0), out.label.classes.to(torch::kFloat32)));
        CHECK(torch::equal(out.tile.pixels, apply_transform(sample.tile.pixels, *out.applied)));
        CHECK(out.tile.tile_id == sample.tile.tile_id);
    }
    CHECK(applied == 200);
    const auto none = augment(sample.tile, sample.label, aug, 0.0);
    CHECK_FALSE(none.applied.has_value());
    CHECK(torch::equal(none.tile.pixels, sample.tile.pixels));
}

TEST_CASE("augmentation frequency and transform choice follow the probability") {
    Rng rng(3);
    const auto sample = testing::random_sample(rng, 4, "t");
    Rng aug(4);
    constexpr int n = 40000;
    int applied = 0;
    std::map<Transform, int> per;
    for (int i = 0; i < n; ++i) {
        const auto out = augment(sample.tile, sample.label, aug, 0.15);
        if (out.applied) {
            ++applied;
            ++per[*out.applied];
        }
    }
    CHECK(static_cast<double>(applied) / n == Catch::Approx(0.15).margin(0.01));
    REQUIRE(per.size() == 5);
    for (const auto& [t, k] : per) {
        CHECK(static_cast<double>(k) / applied == Catch::Approx(0.2).margin(0.02));
    }
    CHECK_THROWS_AS(augment(sample.tile, sample.label, aug, 1.5), Error);
}

TEST_CASE("label grid helpers") {
    LabelGrid g{torch::tensor({0, 1, 2, 3}, torch::kUInt8).reshape({2, 2})};
    CHECK(torch::equal(g.indicator(2), torch::tensor({0.f, 0.f, 1.f, 0.f}).reshape({2, 2})));
    CHECK(torch::equal(g.valid(), torch::tensor({1.f, 1.f, 1.f, 0.f}).reshape({2, 2})));
    CHECK(g.glacier_fraction() == 0.5);
}
