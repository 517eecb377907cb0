#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace oracle {

/// Central finite differences of a scalar function of a double tensor.
inline torch::Tensor finite_difference(const std::function<double(const torch::Tensor&)>& f, const torch::Tensor& x,
                                       double h = 1e-6) {
    auto base = x.detach().to(torch::kFloat64).clone();
    auto grad = torch::zeros_like(base);
    auto* g = grad.data_ptr<double>();
    auto* p = base.data_ptr<double>();
    for (std::int64_t i = 0; i < base.numel(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        const double up = f(base);
        p[i] = keep - h;
        const double down = f(base);
        p[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// ||a - b|| / max(||b||, floor).
inline double relative_error(const torch::Tensor& a, const torch::Tensor& b, double floor = 1e-12) {
    const double diff = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).norm().item<double>();
    return diff / std::max(b.to(torch::kFloat64).norm().item<double>(), floor);
}

using Grid = std::vector<std::vector<int>>;

inline Grid to_grid(const torch::Tensor& t) {
    const auto c = t.to(torch::kInt64).contiguous();
    Grid g(static_cast<std::size_t>(c.size(0)), std::vector<int>(static_cast<std::size_t>(c.size(1))));
    for (std::int64_t r = 0; r < c.size(0); ++r)
        for (std::int64_t k = 0; k < c.size(1); ++k) g[r][k] = static_cast<int>(c[r][k].item<std::int64_t>());
    return g;
}

/// Binary erosion with a k x k window; outside the grid counts as 0.
inline Grid erode(const Grid& m, int k) {
    const int h = static_cast<int>(m.size()), w = static_cast<int>(m[0].size()), r = k / 2;
    Grid out(m.size(), std::vector<int>(m[0].size(), 0));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int all = 1;
            for (int dy = -r; dy <= r && all; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w || m[yy][xx] == 0) {
                        all = 0;
                        break;
                    }
                }
            }
            out[y][x] = all;
        }
    }
    return out;
}

inline Grid boundary(const Grid& m, int k) {
    const auto e = erode(m, k);
    Grid out = m;
    for (std::size_t y = 0; y < m.size(); ++y)
        for (std::size_t x = 0; x < m[0].size(); ++x) out[y][x] = m[y][x] && !e[y][x];
    return out;
}

/// Share of `from` boundary pixels with an `to` boundary pixel within
/// Chebyshev distance theta; 0 for an empty `from`.
inline double matched_share(const Grid& from, const Grid& to, int theta) {
    const int h = static_cast<int>(from.size()), w = static_cast<int>(from[0].size());
    int total = 0, matched = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!from[y][x]) continue;
            ++total;
            bool hit = false;
            for (int yy = std::max(0, y - theta); yy <= std::min(h - 1, y + theta) && !hit; ++yy)
                for (int xx = std::max(0, x - theta); xx <= std::min(w - 1, x + theta) && !hit; ++xx)
                    hit = to[yy][xx] != 0;
            matched += hit;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(matched) / total;
}

/// 1 - boundary F1 for binary grids; 0 when both boundaries are empty.
inline double boundary_loss(const Grid& pred, const Grid& target, int theta, int kernel) {
    const auto pb = boundary(pred, kernel);
    const auto gb = boundary(target, kernel);
    int np = 0, ng = 0;
    for (std::size_t y = 0; y < pb.size(); ++y)
        for (std::size_t x = 0; x < pb[0].size(); ++x) {
            np += pb[y][x];
            ng += gb[y][x];
        }
    if (np == 0 && ng == 0) return 0.0;
    const double p = matched_share(pb, gb, theta);
    const double r = matched_share(gb, pb, theta);
    return p + r == 0.0 ? 1.0 : 1.0 - 2.0 * p * r / (p + r);
}

/// Loop-based soft dice over valid pixels.
inline double dice_loss(const torch::Tensor& pred, const torch::Tensor& target, const torch::Tensor& valid,
                        double eps) {
    const auto p = pred.to(torch::kFloat64).flatten();
    const auto g = target.to(torch::kFloat64).flatten();
    const auto v = valid.to(torch::kFloat64).flatten();
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (std::int64_t i = 0; i < p.numel(); ++i) {
        if (v[i].item<double>() == 0.0) continue;
        inter += p[i].item<double>() * g[i].item<double>();
        sp += p[i].item<double>();
        sg += g[i].item<double>();
    }
    return 1.0 - (2.0 * inter + eps) / (sp + sg + eps);
}

struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Per-pixel counting against a class code, skipping masked (3) pixels.
inline Counts count(const torch::Tensor& prob, const torch::Tensor& classes, int class_id, double threshold) {
    Counts c;
    const auto p = prob.to(torch::kFloat64).contiguous();
    const auto l = classes.to(torch::kInt64).contiguous();
    const auto* pp = p.data_ptr<double>();
    const auto* lp = l.data_ptr<std::int64_t>();
    for (std::int64_t i = 0; i < p.numel(); ++i) {
        if (lp[i] == 3) continue;
        const bool predicted = pp[i] >= threshold;
        const bool actual = lp[i] == class_id;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Brute-force minimiser of f over a regular grid on [lo, hi]^2.
inline std::pair<double, double> grid_argmin(const std::function<double(double, double)>& f, double lo, double hi,
                                             double step) {
    const int n = static_cast<int>(std::llround((hi - lo) / step));
    double best = std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{lo, lo};
    for (int i = 0; i <= n; ++i) {
        const double a = lo + i * step;
        for (int j = 0; j <= n; ++j) {
            const double b = lo + j * step;
            const double v = f(a, b);
            if (v < best) {
                best = v;
                arg = {a, b};
            }
        }
    }
    return arg;
}

}  // namespace oracle
