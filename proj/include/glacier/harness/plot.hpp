#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/types.h>

#include "glacier/saliency.hpp"

namespace glacier::plot {

using Rgb = std::array<std::uint8_t, 3>;

/// RGB8 raster with a few drawing primitives and a built-in 5x7 font.
class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    Rgb pixel(int x, int y) const;
    void set(int x, int y, Rgb color);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb color);
    void line(int x0, int y0, int x1, int y1, Rgb color, int thickness = 1);
    /// Upper-cased text; unknown glyphs render as blanks. Returns drawn width.
    int text(int x, int y, const std::string& s, Rgb color, int scale = 1);
    const std::vector<std::uint8_t>& data() const { return rgb_; }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> rgb_;
};

void write_png(const std::filesystem::path& path, const Canvas& canvas);

struct Series {
    std::string name;
    Rgb color;
    std::vector<double> values;
};

/// Lines over x = 1..n with a legend and y-range labels.
Canvas line_chart(const std::string& title, const std::vector<Series>& series);

/// One group per band, one bar per report (class), legend by class.
Canvas saliency_bar_chart(const std::vector<saliency::SaliencyReport>& reports);

/// Class codes (0..3) to colours, scaled up by `zoom`.
Canvas label_map(const torch::Tensor& classes, int zoom = 4);

/// TP green, FP red, FN blue, TN black, masked grey for one class.
Canvas error_map(const torch::Tensor& predicted_positive, const torch::Tensor& classes, int class_id,
                 int zoom = 4);

}  // namespace glacier::plot
