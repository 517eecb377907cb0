#include "glacier/geodata/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>

#include <tiffio.h>
#include <json.hpp>
#include <torch/torch.h>

#include "glacier/error.hpp"

namespace glacier::geodata {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "tile files are little endian");

namespace {

constexpr ttag_t kModelPixelScaleTag = 33550;
constexpr ttag_t kModelTiepointTag = 33922;

const TIFFFieldInfo kGeoFields[] = {
    {kModelPixelScaleTag, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, const_cast<char*>("ModelPixelScale")},
    {kModelTiepointTag, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, const_cast<char*>("ModelTiepoint")},
};

TIFFExtendProc g_parent_extender = nullptr;

void geo_tag_extender(TIFF* tif) {
    TIFFMergeFieldInfo(tif, kGeoFields, sizeof(kGeoFields) / sizeof(kGeoFields[0]));
    if (g_parent_extender) {
        g_parent_extender(tif);
    }
}

void install_geo_tags() {
    static const bool installed = [] {
        g_parent_extender = TIFFSetTagExtender(geo_tag_extender);
        return true;
    }();
    (void)installed;
}

struct TiffCloser {
    void operator()(TIFF* t) const {
        if (t) TIFFClose(t);
    }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

template <typename T>
double sample_as_double(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
}

double decode_sample(const unsigned char* p, uint16_t bits, uint16_t format) {
    if (format == SAMPLEFORMAT_IEEEFP) {
        if (bits == 32) return sample_as_double<float>(p);
        if (bits == 64) return sample_as_double<double>(p);
    } else if (format == SAMPLEFORMAT_INT) {
        if (bits == 8) return sample_as_double<int8_t>(p);
        if (bits == 16) return sample_as_double<int16_t>(p);
        if (bits == 32) return sample_as_double<int32_t>(p);
    } else {
        if (bits == 8) return sample_as_double<uint8_t>(p);
        if (bits == 16) return sample_as_double<uint16_t>(p);
        if (bits == 32) return sample_as_double<uint32_t>(p);
    }
    throw Error(ErrorCode::io, "unsupported TIFF sample layout: " + std::to_string(bits) + " bits, format " +
                                   std::to_string(format));
}

}  // namespace

Raster read_geotiff(const fs::path& path) {
    install_geo_tags();
    TiffHandle tif(TIFFOpen(path.string().c_str(), "r"));
    require(tif != nullptr, ErrorCode::io, "cannot open TIFF " + path.string());

    uint32_t width = 0;
    uint32_t height = 0;
    uint16_t spp = 1;
    uint16_t bits = 8;
    uint16_t format = SAMPLEFORMAT_UINT;
    uint16_t planar = PLANARCONFIG_CONTIG;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    require(width > 0 && height > 0, ErrorCode::io, "empty TIFF " + path.string());
    require(bits % 8 == 0, ErrorCode::io, "sub-byte TIFF samples are not supported");
    const auto bytes = bits / 8;

    auto data = torch::empty({spp, static_cast<int64_t>(height), static_cast<int64_t>(width)}, torch::kFloat64);
    auto acc = data.accessor<double, 3>();

    if (TIFFIsTiled(tif.get())) {
        uint32_t tw = 0;
        uint32_t th = 0;
        TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tw);
        TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &th);
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFTileSize(tif.get())));
        const uint16_t planes = planar == PLANARCONFIG_SEPARATE ? spp : 1;
        for (uint16_t plane = 0; plane < planes; ++plane) {
            for (uint32_t y = 0; y < height; y += th) {
                for (uint32_t x = 0; x < width; x += tw) {
                    require(TIFFReadTile(tif.get(), buf.data(), x, y, 0, plane) >= 0, ErrorCode::io,
                            "failed reading TIFF tile");
                    for (uint32_t ty = 0; ty < th && y + ty < height; ++ty) {
                        for (uint32_t tx = 0; tx < tw && x + tx < width; ++tx) {
                            if (planar == PLANARCONFIG_SEPARATE) {
                                acc[plane][y + ty][x + tx] =
                                    decode_sample(&buf[(ty * tw + tx) * bytes], bits, format);
                            } else {
                                for (uint16_t s = 0; s < spp; ++s) {
                                    acc[s][y + ty][x + tx] =
                                        decode_sample(&buf[((ty * tw + tx) * spp + s) * bytes], bits, format);
                                }
                            }
                        }
                    }
                }
            }
        }
    } else {
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
        if (planar == PLANARCONFIG_SEPARATE) {
            for (uint16_t s = 0; s < spp; ++s) {
                for (uint32_t y = 0; y < height; ++y) {
                    require(TIFFReadScanline(tif.get(), buf.data(), y, s) >= 0, ErrorCode::io,
                            "failed reading TIFF scanline");
                    for (uint32_t x = 0; x < width; ++x) {
                        acc[s][y][x] = decode_sample(&buf[x * bytes], bits, format);
                    }
                }
            }
        } else {
            for (uint32_t y = 0; y < height; ++y) {
                require(TIFFReadScanline(tif.get(), buf.data(), y, 0) >= 0, ErrorCode::io,
                        "failed reading TIFF scanline");
                for (uint32_t x = 0; x < width; ++x) {
                    for (uint16_t s = 0; s < spp; ++s) {
                        acc[s][y][x] = decode_sample(&buf[(x * spp + s) * bytes], bits, format);
                    }
                }
            }
        }
    }

    Raster raster;
    raster.data = data.to(torch::kFloat32);
    raster.transform = GeoTransform{0.0, static_cast<double>(height), 1.0, 1.0};
    uint32_t count = 0;
    double* scale = nullptr;
    double* tie = nullptr;
    if (TIFFGetField(tif.get(), kModelPixelScaleTag, &count, &scale) && count >= 2 && scale) {
        raster.transform.pixel_width = scale[0];
        raster.transform.pixel_height = scale[1];
        uint32_t tcount = 0;
        if (TIFFGetField(tif.get(), kModelTiepointTag, &tcount, &tie) && tcount >= 6 && tie) {
            // Tiepoint (i, j, k, x, y, z): raster point (i, j) maps to (x, y).
            raster.transform.origin_x = tie[3] - tie[0] * scale[0];
            raster.transform.origin_y = tie[4] + tie[1] * scale[1];
        }
    }
    return raster;
}

void write_geotiff(const fs::path& path, const Raster& raster) {
    install_geo_tags();
    require(raster.data.dim() == 3, ErrorCode::invalid_input, "raster must be [bands, H, W]");
    const bool as_u8 = raster.data.scalar_type() == torch::kUInt8;
    const auto data = as_u8 ? raster.data.contiguous() : raster.data.to(torch::kFloat32).contiguous();
    const auto bands = static_cast<uint16_t>(data.size(0));
    const auto height = static_cast<uint32_t>(data.size(1));
    const auto width = static_cast<uint32_t>(data.size(2));

    TiffHandle tif(TIFFOpen(path.string().c_str(), "w"));
    require(tif != nullptr, ErrorCode::io, "cannot create TIFF " + path.string());
    TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, width);
    TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, height);
    TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, bands);
    TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, as_u8 ? 8 : 32);
    TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, as_u8 ? SAMPLEFORMAT_UINT : SAMPLEFORMAT_IEEEFP);
    TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_SEPARATE);
    TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
    if (bands > 1) {
        std::vector<uint16_t> extra(bands - 1, EXTRASAMPLE_UNSPECIFIED);
        TIFFSetField(tif.get(), TIFFTAG_EXTRASAMPLES, static_cast<uint16_t>(extra.size()), extra.data());
    }
    double scale[3] = {raster.transform.pixel_width, raster.transform.pixel_height, 0.0};
    double tie[6] = {0.0, 0.0, 0.0, raster.transform.origin_x, raster.transform.origin_y, 0.0};
    TIFFSetField(tif.get(), kModelPixelScaleTag, 3, scale);
    TIFFSetField(tif.get(), kModelTiepointTag, 6, tie);

    const auto elem = as_u8 ? 1 : 4;
    const auto* base = static_cast<const unsigned char*>(data.data_ptr());
    std::vector<unsigned char> line(static_cast<std::size_t>(width) * elem);
    for (uint16_t s = 0; s < bands; ++s) {
        for (uint32_t y = 0; y < height; ++y) {
            std::memcpy(line.data(), base + ((static_cast<std::size_t>(s) * height + y) * width) * elem,
                        line.size());
            require(TIFFWriteScanline(tif.get(), line.data(), y, s) >= 0, ErrorCode::io,
                    "failed writing TIFF scanline");
        }
    }
}

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    require(out.good(), ErrorCode::io, "short write to " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), ErrorCode::io, "cannot read " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<char> buf(size);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    return buf;
}

json channel_order() {
    json names = json::array();
    for (const auto& b : landsat7_bands()) {
        names.push_back(b.name);
    }
    return names;
}

}  // namespace

void write_tile(const fs::path& dir, const TileRecord& record) {
    const auto& tile = record.tile;
    require(tile.pixels.dim() == 3 && tile.pixels.size(0) == kNumBands, ErrorCode::band_mismatch,
            "tile " + tile.tile_id + " must be [8, H, W]");
    fs::create_directories(dir);
    const auto pixels = tile.pixels.to(torch::kFloat32).contiguous();
    const auto labels = record.label.classes.to(torch::kUInt8).contiguous();
    const std::string data_name = tile.tile_id + ".bin";
    const std::string label_name = tile.tile_id + ".labels.bin";
    write_bytes(dir / data_name, pixels.data_ptr(), static_cast<std::size_t>(pixels.numel()) * sizeof(float));
    write_bytes(dir / label_name, labels.data_ptr(), static_cast<std::size_t>(labels.numel()));

    json j;
    j["tile_id"] = tile.tile_id;
    j["cell_id"] = tile.cell_id;
    j["split"] = to_string(record.split);
    j["shape"] = {pixels.size(0), pixels.size(1), pixels.size(2)};
    j["dtype"] = "float32";
    j["byte_order"] = "little";
    j["channel_order"] = channel_order();
    j["normalized"] = tile.normalized;
    j["normalization_stats_id"] = tile.stats_id;
    j["data_file"] = data_name;
    j["label_file"] = label_name;
    j["label_dtype"] = "uint8";
    std::ofstream out(dir / (tile.tile_id + ".json"));
    require(out.good(), ErrorCode::io, "cannot write sidecar for " + tile.tile_id);
    out << j.dump(2) << '\n';
}

TileRecord read_tile(const fs::path& sidecar) {
    std::ifstream in(sidecar);
    require(in.good(), ErrorCode::io, "cannot read " + sidecar.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::io, sidecar.string() + ": " + e.what());
    }
    require(j.value("dtype", "") == "float32", ErrorCode::io, "tile dtype must be float32");
    require(j.at("channel_order") == channel_order(), ErrorCode::band_mismatch,
            "tile channel order differs from B1..B7");
    const auto shape = j.at("shape").get<std::vector<int64_t>>();
    require(shape.size() == 3 && shape[0] == kNumBands, ErrorCode::band_mismatch, "tile must be [8, H, W]");
    const auto dir = sidecar.parent_path();

    const auto data = read_bytes(dir / j.at("data_file").get<std::string>());
    require(data.size() == static_cast<std::size_t>(shape[0] * shape[1] * shape[2]) * sizeof(float),
            ErrorCode::io, "tile data size does not match its shape");
    const auto labels = read_bytes(dir / j.at("label_file").get<std::string>());
    require(labels.size() == static_cast<std::size_t>(shape[1] * shape[2]), ErrorCode::io,
            "label data size does not match the tile shape");

    TileRecord rec;
    rec.tile.pixels = torch::empty(shape, torch::kFloat32);
    std::memcpy(rec.tile.pixels.data_ptr(), data.data(), data.size());
    rec.label.classes = torch::empty({shape[1], shape[2]}, torch::kUInt8);
    std::memcpy(rec.label.classes.data_ptr(), labels.data(), labels.size());
    check_label_grid(rec.label.classes);
    rec.tile.tile_id = j.at("tile_id").get<std::string>();
    rec.tile.cell_id = j.at("cell_id").get<std::string>();
    rec.tile.normalized = j.value("normalized", false);
    rec.tile.stats_id = j.value("normalization_stats_id", "");
    rec.split = split_from_string(j.at("split").get<std::string>());
    return rec;
}

std::vector<TileRecord> read_tile_directory(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::io, "not a directory: " + dir.string());
    std::vector<fs::path> sidecars;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            sidecars.push_back(entry.path());
        }
    }
    std::sort(sidecars.begin(), sidecars.end());
    std::vector<TileRecord> out;
    out.reserve(sidecars.size());
    for (const auto& p : sidecars) {
        out.push_back(read_tile(p));
    }
    return out;
}

void write_normalization(const fs::path& path, const NormalizationStats& stats) {
    json j;
    j["id"] = stats.id();
    j["computed_from"] = stats.computed_from;
    j["mean"] = stats.mean;
    j["std"] = stats.std;
    j["channel_order"] = channel_order();
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

NormalizationStats read_normalization(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot read " + path.string());
    const auto j = json::parse(in);
    NormalizationStats stats;
    stats.mean = j.at("mean").get<std::array<double, kNumBands>>();
    stats.std = j.at("std").get<std::array<double, kNumBands>>();
    stats.computed_from = j.value("computed_from", "train");
    require(j.value("id", stats.id()) == stats.id(), ErrorCode::io, "normalization id does not match its values");
    return stats;
}

std::string fishnet_to_geojson(const std::vector<FishnetCell>& cells) {
    json features = json::array();
    for (const auto& c : cells) {
        const auto& b = c.bounds;
        json ring = json::array({{b.min_x, b.min_y}, {b.max_x, b.min_y}, {b.max_x, b.max_y},
                                 {b.min_x, b.max_y}, {b.min_x, b.min_y}});
        features.push_back({
            {"type", "Feature"},
            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
            {"properties",
             {{"cell_id", c.cell_id}, {"split", to_string(c.split)}, {"has_glacier", c.has_glacier},
              {"row", c.row}, {"col", c.col}}},
        });
    }
    return json{{"type", "FeatureCollection"}, {"features", features}}.dump(2);
}

std::vector<FishnetCell> fishnet_from_geojson(const std::string& text) {
    std::vector<FishnetCell> cells;
    try {
        const auto j = json::parse(text);
        for (const auto& f : j.at("features")) {
            const auto& ring = f.at("geometry").at("coordinates").at(0);
            Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
            for (const auto& pt : ring) {
                const double x = pt.at(0).get<double>();
                const double y = pt.at(1).get<double>();
                r.min_x = std::min(r.min_x, x);
                r.max_x = std::max(r.max_x, x);
                r.min_y = std::min(r.min_y, y);
                r.max_y = std::max(r.max_y, y);
            }
            const auto& p = f.at("properties");
            FishnetCell cell;
            cell.cell_id = p.at("cell_id").get<std::string>();
            cell.bounds = r;
            cell.has_glacier = p.at("has_glacier").get<bool>();
            cell.split = split_from_string(p.at("split").get<std::string>());
            cell.row = p.value("row", 0);
            cell.col = p.value("col", 0);
            cells.push_back(std::move(cell));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::io, std::string("bad fishnet GeoJSON: ") + e.what());
    }
    return cells;
}

}  // namespace glacier::geodata
