#include "glacier/geodata/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <torch/torch.h>

#include "glacier/error.hpp"
#include "glacier/keyvalue.hpp"
#include "glacier/rng.hpp"

namespace glacier::geodata {

void validate(const SceneSpec& spec) {
    require(spec.height > 0 && spec.width > 0, ErrorCode::invalid_spec, "scene size must be positive");
    const auto& f = spec.fractions;
    for (double v : {f.background, f.clean, f.debris, f.masked}) {
        require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::invalid_spec,
                "class fractions must lie in [0, 1]");
    }
    require(f.clean + f.debris + f.masked <= 1.0 + 1e-9, ErrorCode::invalid_spec,
            "clean + debris + masked fractions exceed 1");
    require(f.background + f.clean + f.debris + f.masked <= 1.0 + 1e-9, ErrorCode::invalid_spec,
            "class fractions sum above 1");
    for (const auto* m : {&spec.clean_signature, &spec.debris_texture}) {
        for (const auto& [ch, v] : *m) {
            require(ch >= 0 && ch < kNumBands, ErrorCode::invalid_spec,
                    "channel " + std::to_string(ch) + " out of range");
            require(std::isfinite(v), ErrorCode::invalid_spec, "non-finite channel amplitude");
        }
    }
    require(spec.noise >= 0.0 && std::isfinite(spec.noise), ErrorCode::invalid_spec,
            "noise must be nonnegative");
    require(spec.feature_scale >= 0.0, ErrorCode::invalid_spec, "feature scale must be nonnegative");
    if (spec.mask_band_width) {
        require(*spec.mask_band_width >= 0 && *spec.mask_band_width <= spec.width,
                ErrorCode::invalid_spec, "mask band wider than the scene");
    }
}

namespace {

std::map<int, double> parse_channel_map(const std::string& text) {
    std::map<int, double> out;
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        const auto colon = tok.find(':');
        require(colon != std::string::npos, ErrorCode::invalid_spec,
                "channel entries are written channel:value, got '" + tok + "'");
        try {
            out[std::stoi(tok.substr(0, colon))] = std::stod(tok.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::invalid_spec, "bad channel entry '" + tok + "'");
        }
    }
    return out;
}

std::string format_channel_map(const std::map<int, double>& m) {
    std::ostringstream out;
    bool first = true;
    for (const auto& [ch, v] : m) {
        out << (first ? "" : " ") << ch << ':' << v;
        first = false;
    }
    return out.str();
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
    const auto cfg = KeyValueConfig::parse(text);
    SceneSpec spec;
    if (const auto size = cfg.get("size")) {
        const auto x = size->find('x');
        try {
            if (x == std::string::npos) {
                spec.height = spec.width = std::stoll(*size);
            } else {
                spec.height = std::stoll(size->substr(0, x));
                spec.width = std::stoll(size->substr(x + 1));
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::invalid_spec, "size must be N or HxW, got '" + *size + "'");
        }
    }
    if (cfg.has("fractions")) {
        const auto f = cfg.get_doubles("fractions");
        require(f.size() == 4, ErrorCode::invalid_spec,
                "fractions lists background clean debris masked");
        spec.fractions = ClassFractions{f[0], f[1], f[2], f[3]};
    }
    if (const auto v = cfg.get("signatures")) {
        spec.clean_signature = parse_channel_map(*v);
    }
    if (const auto v = cfg.get("texture")) {
        spec.debris_texture = parse_channel_map(*v);
    }
    if (cfg.has("background")) {
        const auto b = cfg.get_doubles("background");
        require(b.size() == kNumBands, ErrorCode::invalid_spec, "background lists 8 values");
        std::copy(b.begin(), b.end(), spec.background.begin());
    }
    spec.noise = cfg.get_double("noise", spec.noise);
    if (cfg.has("mask_band_width")) {
        spec.mask_band_width = cfg.get_int("mask_band_width", 0);
    }
    spec.feature_scale = cfg.get_double("feature_scale", spec.feature_scale);
    spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    validate(spec);
    return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
    const auto cfg = KeyValueConfig::load(path);
    std::ostringstream text;
    for (const auto& [k, v] : cfg.entries()) {
        text << k << " = " << v << '\n';
    }
    return parse_scene_spec(text.str());
}

std::string format_scene_spec(const SceneSpec& spec) {
    std::ostringstream out;
    out.precision(17);
    out << "size = " << spec.height << 'x' << spec.width << '\n';
    out << "fractions = " << spec.fractions.background << ' ' << spec.fractions.clean << ' '
        << spec.fractions.debris << ' ' << spec.fractions.masked << '\n';
    out << "signatures = " << format_channel_map(spec.clean_signature) << '\n';
    out << "texture = " << format_channel_map(spec.debris_texture) << '\n';
    out << "background =";
    for (double b : spec.background) {
        out << ' ' << b;
    }
    out << '\n';
    out << "noise = " << spec.noise << '\n';
    if (spec.mask_band_width) {
        out << "mask_band_width = " << *spec.mask_band_width << '\n';
    }
    out << "feature_scale = " << spec.feature_scale << '\n';
    out << "seed = " << spec.seed << '\n';
    return out.str();
}

namespace {

constexpr std::uint8_t kBackground = static_cast<std::uint8_t>(LabelClass::background);
constexpr std::uint8_t kClean = static_cast<std::uint8_t>(LabelClass::clean);
constexpr std::uint8_t kDebris = static_cast<std::uint8_t>(LabelClass::debris);
constexpr std::uint8_t kMasked = static_cast<std::uint8_t>(LabelClass::masked);

class LabelCanvas {
public:
    LabelCanvas(std::int64_t h, std::int64_t w) : h_(h), w_(w), px_(static_cast<std::size_t>(h * w), kBackground) {}

    std::uint8_t& at(std::int64_t r, std::int64_t c) { return px_[static_cast<std::size_t>(r * w_ + c)]; }
    std::uint8_t at(std::int64_t r, std::int64_t c) const { return px_[static_cast<std::size_t>(r * w_ + c)]; }
    std::int64_t height() const { return h_; }
    std::int64_t width() const { return w_; }

    std::int64_t count(std::uint8_t cls) const {
        return std::count(px_.begin(), px_.end(), cls);
    }

    /// Paints a lobed disc over background pixels only; returns painted count.
    std::int64_t paint_lobe(double cy, double cx, double radius, std::uint8_t cls, Rng& rng) {
        const double a3 = rng.uniform(0.1, 0.3);
        const double a5 = rng.uniform(0.0, 0.15);
        const double p3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double p5 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double reach = radius * (1.0 + a3 + a5);
        const auto r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - reach)));
        const auto r1 = std::min<std::int64_t>(h_ - 1, static_cast<std::int64_t>(std::ceil(cy + reach)));
        const auto c0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - reach)));
        const auto c1 = std::min<std::int64_t>(w_ - 1, static_cast<std::int64_t>(std::ceil(cx + reach)));
        std::int64_t painted = 0;
        for (auto r = r0; r <= r1; ++r) {
            for (auto c = c0; c <= c1; ++c) {
                const double dy = static_cast<double>(r) + 0.5 - cy;
                const double dx = static_cast<double>(c) + 0.5 - cx;
                const double theta = std::atan2(dy, dx);
                const double edge = radius * (1.0 + a3 * std::sin(3.0 * theta + p3) +
                                              a5 * std::sin(5.0 * theta + p5));
                if (dx * dx + dy * dy <= edge * edge && at(r, c) == kBackground) {
                    at(r, c) = cls;
                    ++painted;
                }
            }
        }
        return painted;
    }

private:
    std::int64_t h_;
    std::int64_t w_;
    std::vector<std::uint8_t> px_;
};

/// Low-frequency field with roughly unit standard deviation.
std::vector<double> smooth_field(std::int64_t h, std::int64_t w, Rng& rng) {
    std::vector<double> field(static_cast<std::size_t>(h * w), 0.0);
    constexpr int kWaves = 3;
    for (int k = 0; k < kWaves; ++k) {
        const double fy = rng.uniform(0.5, 2.5) / static_cast<double>(h);
        const double fx = rng.uniform(0.5, 2.5) / static_cast<double>(w);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                field[static_cast<std::size_t>(r * w + c)] +=
                    std::sqrt(2.0 / kWaves) *
                    std::sin(2.0 * std::numbers::pi * (fy * static_cast<double>(r) + fx * static_cast<double>(c)) + phase);
            }
        }
    }
    return field;
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SceneSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const auto h = spec.height;
    const auto w = spec.width;
    const double total = static_cast<double>(h * w);
    const double scale =
        spec.feature_scale > 0.0 ? spec.feature_scale : 0.15 * static_cast<double>(std::min(h, w));

    LabelCanvas labels(h, w);

    const auto band = spec.mask_band_width.value_or(
        static_cast<std::int64_t>(std::llround(spec.fractions.masked * static_cast<double>(w))));
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < band; ++c) {
            labels.at(r, c) = kMasked;
        }
    }
    const double open_min_x = static_cast<double>(band);
    const double open_width = static_cast<double>(w - band);

    // Blobs are added until the deficit is under 2 % of the class target; each
    // radius is capped so a single blob cannot overshoot much.
    const auto tolerance = [](double target) { return std::max(1.0, 0.02 * target); };
    const double clean_target = spec.fractions.clean * total;
    for (int attempt = 0; attempt < 10000 && open_width > 0.0; ++attempt) {
        const double deficit = clean_target - static_cast<double>(labels.count(kClean));
        if (deficit <= tolerance(clean_target)) {
            break;
        }
        const double radius =
            std::max(1.5, std::min(scale * rng.uniform(0.6, 1.4), 1.05 * std::sqrt(deficit / std::numbers::pi)));
        labels.paint_lobe(rng.uniform(0.0, static_cast<double>(h)),
                          open_min_x + rng.uniform(0.0, open_width), radius, kClean, rng);
    }

    const double debris_target = spec.fractions.debris * total;
    for (int attempt = 0; attempt < 10000 && open_width > 0.0; ++attempt) {
        const double deficit = debris_target - static_cast<double>(labels.count(kDebris));
        if (deficit <= tolerance(debris_target)) {
            break;
        }
        const double radius = std::max(
            1.5, std::min(0.5 * scale * rng.uniform(0.6, 1.4), 1.05 * std::sqrt(deficit / std::numbers::pi)));
        // Attach to a clean-ice edge pixel, offset outward; fall back to a free
        // placement when the scene has no clean ice.
        std::vector<std::pair<std::int64_t, std::int64_t>> edges;
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                if (labels.at(r, c) != kClean) {
                    continue;
                }
                const bool touches = (r > 0 && labels.at(r - 1, c) == kBackground) ||
                                     (r + 1 < h && labels.at(r + 1, c) == kBackground) ||
                                     (c > 0 && labels.at(r, c - 1) == kBackground) ||
                                     (c + 1 < w && labels.at(r, c + 1) == kBackground);
                if (touches) {
                    edges.emplace_back(r, c);
                }
            }
        }
        double cy = 0.0;
        double cx = 0.0;
        if (edges.empty()) {
            cy = rng.uniform(0.0, static_cast<double>(h));
            cx = open_min_x + rng.uniform(0.0, open_width);
        } else {
            const auto [er, ec] = edges[rng.index(edges.size())];
            double dy = 0.0;
            double dx = 0.0;
            for (const auto& [oy, ox] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}}) {
                const auto nr = er + oy;
                const auto nc = ec + ox;
                if (nr >= 0 && nr < h && nc >= 0 && nc < w && labels.at(nr, nc) == kBackground) {
                    dy += oy;
                    dx += ox;
                }
            }
            const double norm = std::max(std::hypot(dy, dx), 1e-9);
            cy = static_cast<double>(er) + 0.5 + 0.5 * radius * dy / norm;
            cx = static_cast<double>(ec) + 0.5 + 0.5 * radius * dx / norm;
        }
        labels.paint_lobe(cy, cx, radius, kDebris, rng);
    }

    // Spectra.
    auto pixels = torch::empty({kNumBands, h, w}, torch::kFloat32);
    auto acc = pixels.accessor<float, 3>();
    // Debris texture: random sign per 2x2 block, shared across channels.
    const auto bh = (h + 1) / 2;
    const auto bw = (w + 1) / 2;
    std::vector<double> texture(static_cast<std::size_t>(bh * bw));
    for (auto& t : texture) {
        t = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    for (int ch = 0; ch < kNumBands; ++ch) {
        const auto field = smooth_field(h, w, rng);
        const auto sig = spec.clean_signature.find(ch);
        const double clean_offset = sig == spec.clean_signature.end() ? 0.0 : sig->second;
        const auto tex = spec.debris_texture.find(ch);
        const double texture_amp = tex == spec.debris_texture.end() ? 0.0 : tex->second;
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                double v = spec.background[static_cast<std::size_t>(ch)];
                const double white = rng.normal();
                v += spec.noise * (0.6 * field[static_cast<std::size_t>(r * w + c)] + 0.8 * white);
                const auto cls = labels.at(r, c);
                if (cls == kClean) {
                    v += clean_offset;
                } else if (cls == kDebris) {
                    v += texture_amp * texture[static_cast<std::size_t>((r / 2) * bw + c / 2)];
                }
                acc[ch][r][c] = static_cast<float>(v);
            }
        }
    }

    auto classes = torch::empty({h, w}, torch::kUInt8);
    auto lacc = classes.accessor<std::uint8_t, 2>();
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < w; ++c) {
            lacc[r][c] = labels.at(r, c);
        }
    }

    SyntheticScene scene;
    scene.tile.pixels = pixels;
    scene.tile.tile_id = "synthetic_" + std::to_string(spec.seed);
    scene.tile.cell_id = "synthetic";
    scene.label.classes = classes;
    return scene;
}

std::array<double, kNumLabelClasses> class_fractions(const LabelGrid& label) {
    std::array<double, kNumLabelClasses> out{};
    const auto counts = torch::bincount(label.classes.flatten().to(torch::kInt64), {}, kNumLabelClasses);
    for (int k = 0; k < kNumLabelClasses; ++k) {
        out[k] = static_cast<double>(counts[k].item<std::int64_t>()) /
                 static_cast<double>(label.classes.numel());
    }
    return out;
}

}  // namespace glacier::geodata
