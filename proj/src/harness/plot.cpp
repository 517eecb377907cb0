#include "glacier/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <png.h>
#include <torch/torch.h>

#include "glacier/bands.hpp"
#include "glacier/error.hpp"

namespace glacier::plot {

namespace {

using Glyph = std::array<const char*, 7>;

const std::map<char, Glyph>& font() {
    static const std::map<char, Glyph> glyphs{
        {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
        {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
        {'C', {" ####", "#    ", "#    ", "#    ", "#    ", "#    ", " ####"}},
        {'D', {"#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "}},
        {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
        {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
        {'G', {" ####", "#    ", "#    ", "#  ##", "#   #", "#   #", " ####"}},
        {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
        {'I', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "#####"}},
        {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
        {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
        {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
        {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
        {'N', {"#   #", "##  #", "# # #", "#  ##", "#   #", "#   #", "#   #"}},
        {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
        {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
        {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
        {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
        {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
        {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
        {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
        {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "## ##", "#   #"}},
        {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
        {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
        {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
        {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
        {'3', {"#### ", "    #", "    #", " ### ", "    #", "    #", "#### "}},
        {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
        {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
        {'6', {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "}},
        {'7', {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "}},
        {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
        {'9', {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "}},
        {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "#####"}},
        {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
        {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
        {':', {"     ", " ##  ", " ##  ", "     ", " ##  ", " ##  ", "     "}},
        {'/', {"    #", "    #", "   # ", "  #  ", " #   ", "#    ", "#    "}},
    };
    return glyphs;
}

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrey{120, 120, 120};

const std::array<Rgb, 6> kPalette{{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                    {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background)
    : width_(width), height_(height), rgb_(static_cast<std::size_t>(width) * height * 3) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "canvas must be non-empty");
    for (std::size_t i = 0; i < rgb_.size(); i += 3) {
        rgb_[i] = background[0];
        rgb_[i + 1] = background[1];
        rgb_[i + 2] = background[2];
    }
}

Rgb Canvas::pixel(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

void Canvas::set(int x, int y, Rgb color) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) {
        return;
    }
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    rgb_[i] = color[0];
    rgb_[i + 1] = color[1];
    rgb_[i + 2] = color[2];
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb color) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
        for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) {
            set(x, y, color);
        }
    }
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb color, int thickness) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    const int r = thickness / 2;
    while (true) {
        fill_rect(x0 - r, y0 - r, x0 + r, y0 + r, color);
        if (x0 == x1 && y0 == y1) {
            break;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

int Canvas::text(int x, int y, const std::string& s, Rgb color, int scale) {
    const auto& glyphs = font();
    int cursor = x;
    for (char ch : s) {
        const auto up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (const auto it = glyphs.find(up); it != glyphs.end()) {
            for (int row = 0; row < 7; ++row) {
                for (int col = 0; col < 5; ++col) {
                    if (it->second[static_cast<std::size_t>(row)][col] == '#') {
                        fill_rect(cursor + col * scale, y + row * scale, cursor + (col + 1) * scale - 1,
                                  y + (row + 1) * scale - 1, color);
                    }
                }
            }
        }
        cursor += 6 * scale;
    }
    return cursor - x;
}

void write_png(const std::filesystem::path& path, const Canvas& canvas) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    require(fp != nullptr, ErrorCode::io, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error(ErrorCode::io, "libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(canvas.width()), static_cast<png_uint_32>(canvas.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto& data = canvas.data();
    for (int y = 0; y < canvas.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(&data[static_cast<std::size_t>(y) * canvas.width() * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

Canvas line_chart(const std::string& title, const std::vector<Series>& series) {
    constexpr int kWidth = 640;
    constexpr int kHeight = 400;
    constexpr int kLeft = 70;
    constexpr int kRight = 20;
    constexpr int kTop = 50;
    constexpr int kBottom = 50;
    Canvas canvas(kWidth, kHeight);
    canvas.text(kLeft, 15, title, kBlack, 2);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t n = 0;
    for (const auto& s : series) {
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        n = std::max(n, s.values.size());
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const int x0 = kLeft;
    const int x1 = kWidth - kRight;
    const int y0 = kHeight - kBottom;
    const int y1 = kTop;
    canvas.line(x0, y0, x1, y0, kBlack);
    canvas.line(x0, y0, x0, y1, kBlack);
    canvas.text(5, y1, format_value(hi), kBlack);
    canvas.text(5, y0 - 7, format_value(lo), kBlack);
    canvas.text(x0, y0 + 10, "EPOCH 1", kBlack);
    const auto last = "EPOCH " + std::to_string(n);
    canvas.text(x1 - 6 * static_cast<int>(last.size()), y0 + 10, last, kBlack);

    const auto px = [&](std::size_t i) {
        return n <= 1 ? x0 : x0 + static_cast<int>(std::lround(static_cast<double>(i) * (x1 - x0) / (n - 1)));
    };
    const auto py = [&](double v) { return y0 - static_cast<int>(std::lround((v - lo) / (hi - lo) * (y0 - y1))); };
    int legend_x = x0 + 10;
    for (const auto& s : series) {
        for (std::size_t i = 1; i < s.values.size(); ++i) {
            canvas.line(px(i - 1), py(s.values[i - 1]), px(i), py(s.values[i]), s.color, 2);
        }
        if (s.values.size() == 1) {
            canvas.fill_rect(px(0) - 2, py(s.values[0]) - 2, px(0) + 2, py(s.values[0]) + 2, s.color);
        }
        canvas.fill_rect(legend_x, kHeight - 18, legend_x + 10, kHeight - 10, s.color);
        legend_x += 16 + canvas.text(legend_x + 14, kHeight - 18, s.name, kBlack) + 10;
    }
    return canvas;
}

Canvas saliency_bar_chart(const std::vector<saliency::SaliencyReport>& reports) {
    require(!reports.empty(), ErrorCode::invalid_input, "bar chart needs at least one report");
    const auto channels = static_cast<int>(reports.front().per_channel_scores.size());
    constexpr int kGroup = 80;
    constexpr int kLeft = 60;
    constexpr int kTop = 60;
    constexpr int kPlotHeight = 260;
    const int width = kLeft + channels * kGroup + 20;
    const int height = kTop + kPlotHeight + 60;
    Canvas canvas(width, height);
    canvas.text(kLeft, 15, "SALIENCY SCORE PER BAND", kBlack, 2);

    double hi = 0.0;
    for (const auto& r : reports) {
        for (double s : r.per_channel_scores) {
            hi = std::max(hi, s);
        }
    }
    if (hi <= 0.0) {
        hi = 1.0;
    }
    const int base = kTop + kPlotHeight;
    canvas.line(kLeft - 5, base, width - 10, base, kBlack);
    canvas.line(kLeft - 5, base, kLeft - 5, kTop, kBlack);
    canvas.text(5, kTop, format_value(hi), kBlack);
    canvas.text(5, base - 7, "0", kBlack);

    const int bar = std::max(4, (kGroup - 16) / static_cast<int>(reports.size()));
    const auto& bands = landsat7_bands();
    for (int c = 0; c < channels; ++c) {
        const int gx = kLeft + c * kGroup + 4;
        for (std::size_t k = 0; k < reports.size(); ++k) {
            const double s = reports[k].per_channel_scores[static_cast<std::size_t>(c)];
            const int h = static_cast<int>(std::lround(s / hi * kPlotHeight));
            const int bx = gx + static_cast<int>(k) * bar;
            canvas.fill_rect(bx, base - h, bx + bar - 2, base - 1, kPalette[k % kPalette.size()]);
        }
        const std::string name = c < kNumBands ? bands[static_cast<std::size_t>(c)].name : "CH" + std::to_string(c);
        canvas.text(gx, base + 8, name.size() > 12 ? name.substr(0, 12) : name, kBlack);
    }
    int legend_x = kLeft;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        canvas.fill_rect(legend_x, height - 22, legend_x + 10, height - 14, kPalette[k % kPalette.size()]);
        const auto label = reports[k].class_name.empty() ? "MODEL " + std::to_string(k) : reports[k].class_name;
        legend_x += 16 + canvas.text(legend_x + 14, height - 22, label, kBlack) + 10;
    }
    return canvas;
}

Canvas label_map(const torch::Tensor& classes, int zoom) {
    require(classes.dim() == 2, ErrorCode::invalid_input, "label map expects [H, W]");
    static constexpr std::array<Rgb, 4> colours{{{60, 60, 60}, {200, 240, 255}, {150, 100, 50}, {0, 0, 0}}};
    const auto c = classes.to(torch::kInt64).contiguous();
    auto acc = c.accessor<std::int64_t, 2>();
    Canvas canvas(static_cast<int>(c.size(1)) * zoom, static_cast<int>(c.size(0)) * zoom);
    for (std::int64_t y = 0; y < c.size(0); ++y) {
        for (std::int64_t x = 0; x < c.size(1); ++x) {
            const auto v = std::clamp<std::int64_t>(acc[y][x], 0, 3);
            canvas.fill_rect(static_cast<int>(x) * zoom, static_cast<int>(y) * zoom,
                             static_cast<int>(x + 1) * zoom - 1, static_cast<int>(y + 1) * zoom - 1,
                             colours[static_cast<std::size_t>(v)]);
        }
    }
    return canvas;
}

Canvas error_map(const torch::Tensor& predicted_positive, const torch::Tensor& classes, int class_id, int zoom) {
    require(predicted_positive.sizes() == classes.sizes() && classes.dim() == 2, ErrorCode::shape_mismatch,
            "error map inputs differ in shape");
    const auto pred = predicted_positive.to(torch::kBool).contiguous();
    const auto cls = classes.to(torch::kInt64).contiguous();
    auto pa = pred.accessor<bool, 2>();
    auto ca = cls.accessor<std::int64_t, 2>();
    Canvas canvas(static_cast<int>(cls.size(1)) * zoom, static_cast<int>(cls.size(0)) * zoom);
    for (std::int64_t y = 0; y < cls.size(0); ++y) {
        for (std::int64_t x = 0; x < cls.size(1); ++x) {
            Rgb colour = kBlack;
            if (ca[y][x] == static_cast<int>(LabelClass::masked)) {
                colour = kGrey;
            } else {
                const bool truth = ca[y][x] == class_id;
                if (pa[y][x] && truth) colour = {40, 200, 60};
                else if (pa[y][x]) colour = {220, 40, 40};
                else if (truth) colour = {40, 90, 230};
            }
            canvas.fill_rect(static_cast<int>(x) * zoom, static_cast<int>(y) * zoom,
                             static_cast<int>(x + 1) * zoom - 1, static_cast<int>(y + 1) * zoom - 1, colour);
        }
    }
    return canvas;
}

}  // namespace glacier::plot
