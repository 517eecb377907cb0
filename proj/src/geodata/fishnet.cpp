#include "glacier/geodata/fishnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "glacier/bands.hpp"
#include "glacier/error.hpp"
#include "glacier/hash.hpp"
#include "glacier/rng.hpp"

namespace glacier::geodata {

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::discarded: return "discarded";
    }
    return "discarded";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    if (name == "discarded") return Split::discarded;
    throw Error(ErrorCode::invalid_input, "unknown split '" + name + "'");
}

Rect GeoTransform::extent(std::int64_t width, std::int64_t height) const {
    return Rect{origin_x, origin_y - static_cast<double>(height) * pixel_height,
                origin_x + static_cast<double>(width) * pixel_width, origin_y};
}

PixelWindow to_pixel_window(const Rect& bounds, const GeoTransform& transform,
                            std::int64_t raster_width, std::int64_t raster_height) {
    // A pixel belongs to the cell when its centre lies in [min, max).
    const auto col_first = [&](double x) {
        return static_cast<std::int64_t>(
            std::ceil((x - transform.origin_x) / transform.pixel_width - 0.5));
    };
    const auto row_first = [&](double y) {
        return static_cast<std::int64_t>(
                   std::floor((transform.origin_y - y) / transform.pixel_height - 0.5)) +
               1;
    };
    PixelWindow w;
    w.col0 = std::clamp<std::int64_t>(col_first(bounds.min_x), 0, raster_width);
    w.col1 = std::clamp<std::int64_t>(col_first(bounds.max_x), 0, raster_width);
    w.row0 = std::clamp<std::int64_t>(row_first(bounds.max_y), 0, raster_height);
    w.row1 = std::clamp<std::int64_t>(row_first(bounds.min_y), 0, raster_height);
    return w;
}

namespace {

int cell_count(double length, double cell_size) {
    auto n = static_cast<int>(std::ceil(length / cell_size));
    // Guard against ceil(4.0000000001) style rounding producing a sliver.
    while (n > 1 && static_cast<double>(n - 1) * cell_size >= length) {
        --n;
    }
    return std::max(n, 1);
}

}  // namespace

std::vector<FishnetCell> build_fishnet(const Rect& extent, double cell_size) {
    require(std::isfinite(extent.min_x) && std::isfinite(extent.max_x) &&
                std::isfinite(extent.min_y) && std::isfinite(extent.max_y),
            ErrorCode::invalid_input, "extent must be finite");
    require(extent.width() > 0.0 && extent.height() > 0.0, ErrorCode::invalid_input,
            "extent must have positive width and height");
    require(cell_size > 0.0 && std::isfinite(cell_size), ErrorCode::invalid_input,
            "cell size must be positive");

    const int cols = cell_count(extent.width(), cell_size);
    const int rows = cell_count(extent.height(), cell_size);

    std::vector<FishnetCell> cells;
    cells.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        const double max_y = r == 0 ? extent.max_y : extent.max_y - r * cell_size;
        const double min_y = r == rows - 1 ? extent.min_y : extent.max_y - (r + 1) * cell_size;
        for (int c = 0; c < cols; ++c) {
            const double min_x = c == 0 ? extent.min_x : extent.min_x + c * cell_size;
            const double max_x = c == cols - 1 ? extent.max_x : extent.min_x + (c + 1) * cell_size;
            char id[32];
            std::snprintf(id, sizeof(id), "cell_%03d_%03d", r, c);
            cells.push_back(FishnetCell{id, Rect{min_x, min_y, max_x, max_y}, r, c, false,
                                        Split::discarded});
        }
    }
    return cells;
}

namespace {

bool point_in_polygon(const Polygon& poly, double x, double y) {
    bool inside = false;
    const auto n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > y) != (b.y > y)) {
            const double x_cross = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (x < x_cross) {
                inside = !inside;
            }
        }
    }
    return inside;
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
           d4 != 0;
}

}  // namespace

bool intersects(const Polygon& polygon, const Rect& rect) {
    if (polygon.size() < 3) {
        return false;
    }
    for (const auto& p : polygon) {
        if (rect.contains(p.x, p.y)) {
            return true;
        }
    }
    const std::array<Point, 4> corners{Point{rect.min_x, rect.min_y}, Point{rect.max_x, rect.min_y},
                                       Point{rect.max_x, rect.max_y}, Point{rect.min_x, rect.max_y}};
    const double cx = 0.5 * (rect.min_x + rect.max_x);
    const double cy = 0.5 * (rect.min_y + rect.max_y);
    if (point_in_polygon(polygon, cx, cy)) {
        return true;
    }
    for (const auto& c : corners) {
        if (point_in_polygon(polygon, c.x, c.y)) {
            return true;
        }
    }
    const auto n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = polygon[i];
        const auto& b = polygon[(i + 1) % n];
        for (std::size_t k = 0; k < 4; ++k) {
            if (segments_intersect(a, b, corners[k], corners[(k + 1) % 4])) {
                return true;
            }
        }
    }
    return false;
}

void flag_glacier_cells(std::vector<FishnetCell>& cells, const std::vector<Polygon>& labels) {
    for (auto& cell : cells) {
        cell.has_glacier = std::any_of(labels.begin(), labels.end(),
                                       [&](const Polygon& p) { return intersects(p, cell.bounds); });
    }
}

void flag_glacier_cells(std::vector<FishnetCell>& cells, const torch::Tensor& label_raster,
                        const GeoTransform& transform) {
    require(label_raster.dim() == 2, ErrorCode::invalid_input, "label raster must be [H, W]");
    const auto height = label_raster.size(0);
    const auto width = label_raster.size(1);
    const auto glacier = (label_raster == static_cast<int>(LabelClass::clean)) |
                         (label_raster == static_cast<int>(LabelClass::debris));
    for (auto& cell : cells) {
        const auto w = to_pixel_window(cell.bounds, transform, width, height);
        cell.has_glacier = w.height() > 0 && w.width() > 0 &&
                           glacier.slice(0, w.row0, w.row1).slice(1, w.col0, w.col1).any().item<bool>();
    }
}

std::vector<FishnetCell> split_cells(std::vector<FishnetCell> cells, const SplitRatios& ratios,
                                     std::uint64_t seed) {
    const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
    for (double v : r) {
        require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_input,
                "split ratios must be nonnegative");
    }
    require(std::abs(r[0] + r[1] + r[2] - 1.0) < 1e-9, ErrorCode::invalid_input,
            "split ratios must sum to 1");

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].split = Split::discarded;
        if (cells[i].has_glacier) {
            kept.push_back(i);
        }
    }
    require(!kept.empty(), ErrorCode::empty_dataset, "no fishnet cell contains glacier labels");

    const auto n = static_cast<double>(kept.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        // 1e-9 absorbs ratios such as 141/201 that land a hair below an integer.
        const double exact = r[k] * n;
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < kept.size(); k = (k + 1) % 3) {
        if (r[order[k]] > 0.0) {
            ++counts[order[k]];
            ++assigned;
        }
    }

    Rng rng(seed);
    rng.shuffle(kept.begin(), kept.end());
    std::size_t pos = 0;
    const std::array<Split, 3> splits{Split::train, Split::val, Split::test};
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i) {
            cells[kept[pos++]].split = splits[k];
        }
    }
    return cells;
}

std::vector<FishnetCell> filter_and_split(std::vector<FishnetCell> cells,
                                          const std::vector<Polygon>& labels,
                                          const SplitRatios& ratios, std::uint64_t seed) {
    flag_glacier_cells(cells, labels);
    return split_cells(std::move(cells), ratios, seed);
}

std::string split_digest(const std::vector<FishnetCell>& cells) {
    Fnv1a h;
    for (const auto& c : cells) {
        h.update(c.cell_id);
        h.update(":");
        h.update(to_string(c.split));
        h.update(";");
    }
    return h.hex();
}

}  // namespace glacier::geodata
